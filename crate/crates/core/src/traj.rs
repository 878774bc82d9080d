//! Sparse waypoint tracks and their dense, per-frame interpolation.
//!
//! Positions use monotone piecewise cubic Hermite interpolation (PCHIP), orientations
//! use piecewise shortest-arc slerp. Contact points ride rigidly on carried objects.

use crate::error::{Error, Result};
use crate::scene::{Orientation, OrientedBox, Quat, Vec3};
use serde::{Deserialize, Serialize};

pub type Frame = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub frame: Frame,
    pub position: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Orientation>,
}

impl Waypoint {
    pub fn new(frame: Frame, position: Vec3) -> Self {
        Waypoint { frame, position, orientation: None }
    }

    pub fn with_orientation(mut self, o: Orientation) -> Self {
        self.orientation = Some(o);
        self
    }
}

/// Timed waypoints for one joint or object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlTrack {
    pub name: String,
    pub waypoints: Vec<Waypoint>,
}

impl ControlTrack {
    pub fn new(name: impl Into<String>, waypoints: Vec<Waypoint>) -> Self {
        ControlTrack { name: name.into(), waypoints }
    }

    /// Builds a track from `[frame, x, y, z]` rows.
    pub fn from_rows(name: impl Into<String>, rows: &[[f64; 4]]) -> Self {
        let waypoints = rows
            .iter()
            .map(|r| Waypoint::new(r[0] as Frame, Vec3::new(r[1], r[2], r[3])))
            .collect();
        ControlTrack::new(name, waypoints)
    }

    pub fn rows(&self) -> Vec<[f64; 4]> {
        self.waypoints
            .iter()
            .map(|w| [w.frame as f64, w.position.x, w.position.y, w.position.z])
            .collect()
    }

    pub fn first_frame(&self) -> Option<Frame> {
        self.waypoints.first().map(|w| w.frame)
    }

    pub fn last_frame(&self) -> Option<Frame> {
        self.waypoints.last().map(|w| w.frame)
    }

    /// Checks that frames strictly increase and positions are finite.
    pub fn validate(&self) -> Result<()> {
        for w in &self.waypoints {
            if !w.position.is_finite() {
                return Err(Error::arg(format!("track `{}` has a non-finite waypoint", self.name)));
            }
        }
        for pair in self.waypoints.windows(2) {
            if pair[1].frame <= pair[0].frame {
                return Err(Error::arg(format!(
                    "track `{}` frames must strictly increase ({} then {})",
                    self.name, pair[0].frame, pair[1].frame
                )));
            }
        }
        Ok(())
    }

    pub fn path_length(&self) -> f64 {
        self.waypoints.windows(2).map(|p| p[0].position.dist(p[1].position)).sum()
    }
}

/// Per-frame poses over the contiguous range `start_frame ..= end_frame()`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTrack {
    pub start_frame: Frame,
    pub positions: Vec<Vec3>,
    pub orientations: Vec<Quat>,
}

impl DenseTrack {
    pub fn constant(start_frame: Frame, len: usize, p: Vec3, q: Quat) -> Self {
        DenseTrack { start_frame, positions: vec![p; len], orientations: vec![q; len] }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn end_frame(&self) -> Frame {
        self.start_frame + self.positions.len().saturating_sub(1) as Frame
    }

    /// Pose at an absolute frame, clamped to the covered range.
    pub fn pose_at(&self, frame: Frame) -> (Vec3, Quat) {
        let i = frame.saturating_sub(self.start_frame) as usize;
        let i = i.min(self.len() - 1);
        (self.positions[i], self.orientations[i])
    }
}

/// Monotone cubic Hermite interpolant of one scalar channel.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

fn same_sign(a: f64, b: f64) -> bool {
    (a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0)
}

fn edge_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if !same_sign(d, m0) {
        0.0
    } else if !same_sign(m0, m1) && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

impl Pchip {
    /// `x` must strictly increase; at least two knots.
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::arg("pchip needs at least two knots of matching length"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::arg("pchip knots must strictly increase"));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = m[0];
            d[1] = m[0];
        } else {
            for k in 1..n - 1 {
                if same_sign(m[k - 1], m[k]) {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
                }
            }
            d[0] = edge_slope(h[0], h[1], m[0], m[1]);
            d[n - 1] = edge_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        }
        Ok(Pchip { x: x.to_vec(), y: y.to_vec(), d })
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    /// Value at `t`; outside the knot range the end values are held.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.interval(t);
        if t == self.x[k] {
            return self.y[k];
        }
        let h = self.x[k + 1] - self.x[k];
        let s = t - self.x[k];
        let m = (self.y[k + 1] - self.y[k]) / h;
        let c2 = (3.0 * m - 2.0 * self.d[k] - self.d[k + 1]) / h;
        let c3 = (self.d[k] + self.d[k + 1] - 2.0 * m) / (h * h);
        self.y[k] + s * (self.d[k] + s * (c2 + s * c3))
    }

    /// First derivative at `t` inside the knot range.
    pub fn derivative(&self, t: f64) -> f64 {
        let k = self.interval(t.clamp(self.x[0], *self.x.last().unwrap()));
        let h = self.x[k + 1] - self.x[k];
        let s = t - self.x[k];
        let m = (self.y[k + 1] - self.y[k]) / h;
        let c2 = (3.0 * m - 2.0 * self.d[k] - self.d[k + 1]) / h;
        let c3 = (self.d[k] + self.d[k + 1] - 2.0 * m) / (h * h);
        self.d[k] + s * (2.0 * c2 + 3.0 * s * c3)
    }

    pub fn slopes(&self) -> &[f64] {
        &self.d
    }
}

/// Three-channel PCHIP over waypoint frames.
#[derive(Debug, Clone)]
pub struct PchipVec3 {
    ch: [Pchip; 3],
}

impl PchipVec3 {
    pub fn new(frames: &[f64], pts: &[Vec3]) -> Result<Self> {
        let chan = |i: usize| Pchip::new(frames, &pts.iter().map(|p| p[i]).collect::<Vec<_>>());
        Ok(PchipVec3 { ch: [chan(0)?, chan(1)?, chan(2)?] })
    }

    pub fn eval(&self, t: f64) -> Vec3 {
        Vec3::new(self.ch[0].eval(t), self.ch[1].eval(t), self.ch[2].eval(t))
    }

    pub fn derivative(&self, t: f64) -> Vec3 {
        Vec3::new(self.ch[0].derivative(t), self.ch[1].derivative(t), self.ch[2].derivative(t))
    }
}

fn check_track(track: &ControlTrack) -> Result<()> {
    if track.waypoints.len() < 2 {
        return Err(Error::arg(format!("track `{}` needs at least two waypoints", track.name)));
    }
    for pair in track.waypoints.windows(2) {
        if pair[1].frame == pair[0].frame {
            return Err(Error::arg(format!("track `{}` has duplicate frame {}", track.name, pair[0].frame)));
        }
    }
    track.validate()
}

/// Dense positions from the first to the last waypoint frame.
pub fn pchip_densify(track: &ControlTrack) -> Result<Vec<Vec3>> {
    check_track(track)?;
    let frames: Vec<f64> = track.waypoints.iter().map(|w| w.frame as f64).collect();
    let pts: Vec<Vec3> = track.waypoints.iter().map(|w| w.position).collect();
    let p = PchipVec3::new(&frames, &pts)?;
    let (a, b) = (track.waypoints[0].frame, track.waypoints.last().unwrap().frame);
    Ok((a..=b).map(|f| p.eval(f as f64)).collect())
}

/// Piecewise slerp through `(frame, quaternion)` knots, sampled at every frame of the knot range.
pub fn slerp_knots(knots: &[(Frame, Quat)]) -> Result<Vec<Quat>> {
    if knots.len() < 2 {
        return Err(Error::arg("slerp needs at least two oriented knots"));
    }
    let unit: Vec<(Frame, Quat)> = knots
        .iter()
        .map(|&(f, q)| q.normalized().map(|u| (f, u)).ok_or_else(|| Error::arg("zero quaternion")))
        .collect::<Result<_>>()?;
    if unit.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::arg("slerp knot frames must strictly increase"));
    }
    let mut out = Vec::new();
    for (i, pair) in unit.windows(2).enumerate() {
        let (fa, qa) = pair[0];
        let (fb, qb) = pair[1];
        let span = (fb - fa) as f64;
        let first = if i == 0 { fa } else { fa + 1 };
        for f in first..=fb {
            out.push(if f == fb { align(qa, qb) } else { qa.slerp(qb, (f - fa) as f64 / span) });
        }
    }
    Ok(out)
}

fn align(reference: Quat, q: Quat) -> Quat {
    if reference.dot(q) < 0.0 {
        q.neg()
    } else {
        q
    }
}

/// Dense orientations over the waypoint range. Waypoints without an orientation
/// inherit slerp between the nearest oriented ones; with no orientations at all,
/// `fallback` is held.
pub fn slerp_densify(track: &ControlTrack, fallback: Quat) -> Result<Vec<Quat>> {
    check_track(track)?;
    let (a, b) = (track.waypoints[0].frame, track.waypoints.last().unwrap().frame);
    let len = (b - a + 1) as usize;
    let knots: Vec<(Frame, Quat)> =
        track.waypoints.iter().filter_map(|w| w.orientation.map(|o| (w.frame, o.quat))).collect();
    match knots.len() {
        0 => Ok(vec![fallback; len]),
        1 => Ok(vec![knots[0].1; len]),
        _ => {
            let inner = slerp_knots(&knots)?;
            let (ka, kb) = (knots[0].0, knots.last().unwrap().0);
            let mut out = Vec::with_capacity(len);
            out.extend(std::iter::repeat_n(inner[0], (ka - a) as usize));
            out.extend_from_slice(&inner);
            out.extend(std::iter::repeat_n(*inner.last().unwrap(), (b - kb) as usize));
            Ok(out)
        }
    }
}

/// Positions and orientations over the waypoint range.
pub fn densify(track: &ControlTrack, fallback: Quat) -> Result<DenseTrack> {
    let positions = pchip_densify(track)?;
    let orientations = slerp_densify(track, fallback)?;
    Ok(DenseTrack { start_frame: track.waypoints[0].frame, positions, orientations })
}

/// Deterministic surface samples of a box, in box-local coordinates: the 8 corners,
/// then a regular grid of `per_edge x per_edge` points on each face.
pub fn box_surface_points(b: &OrientedBox, per_edge: usize) -> Vec<Vec3> {
    let h = b.half();
    let mut pts = Vec::new();
    for i in 0..8 {
        let s = |bit: usize| if i & bit == 0 { -1.0 } else { 1.0 };
        pts.push(Vec3::new(s(1) * h.x, s(2) * h.y, s(4) * h.z));
    }
    let n = per_edge.max(2);
    let u = |k: usize| -1.0 + 2.0 * k as f64 / (n - 1) as f64;
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            for i in 0..n {
                for j in 0..n {
                    let (a, c) = (u(i), u(j));
                    let p = match axis {
                        0 => Vec3::new(sign * h.x, a * h.y, c * h.z),
                        1 => Vec3::new(a * h.x, sign * h.y, c * h.z),
                        _ => Vec3::new(a * h.x, c * h.y, sign * h.z),
                    };
                    pts.push(p);
                }
            }
        }
    }
    pts
}

/// Index of the surface point nearest `p`; lowest index wins ties.
pub fn nearest_index(surface: &[Vec3], p: Vec3) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in surface.iter().enumerate() {
        let d = s.dist(p);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Surface points nearest the left and right hand.
pub fn sample_contact_points(surface: &[Vec3], hands: (Vec3, Vec3)) -> Result<(Vec3, Vec3)> {
    let l = nearest_index(surface, hands.0).ok_or_else(|| Error::arg("empty contact surface"))?;
    let r = nearest_index(surface, hands.1).expect("surface is nonempty");
    Ok((surface[l], surface[r]))
}

/// Hand trajectories that ride rigidly on an object at fixed local contact offsets.
pub fn hand_tracks_from_object(object: &DenseTrack, contact_local: (Vec3, Vec3)) -> (DenseTrack, DenseTrack) {
    let ride = |c: Vec3| DenseTrack {
        start_frame: object.start_frame,
        positions: object
            .positions
            .iter()
            .zip(&object.orientations)
            .map(|(p, q)| q.rotate(c) + *p)
            .collect(),
        orientations: object.orientations.clone(),
    };
    (ride(contact_local.0), ride(contact_local.1))
}
