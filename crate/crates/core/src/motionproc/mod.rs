//! Curation arithmetic for estimated pose streams: shot segmentation, quality filters,
//! discontinuity repair and windowed smoothing.

mod stream;

pub use stream::{load_stream, read_stream, write_stream};

use crate::error::{Error, Result};
use crate::scene::{Quat, Vec3};
use crate::traj::PchipVec3;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseStream {
    pub fps: f64,
    pub joint_names: Vec<String>,
    /// Per frame, one position per joint.
    pub joints: Vec<Vec<Vec3>>,
    pub root: Vec<Vec3>,
    pub orientation: Vec<Quat>,
    /// Per-frame detected person box area in pixels.
    pub bbox_area: Option<Vec<f64>>,
    /// Per-frame key-joint detector confidences.
    pub confidence: Option<Vec<Vec<f64>>>,
    /// Per-frame full-body visibility.
    pub full_body: Option<Vec<bool>>,
    pub video_height: Option<u32>,
}

impl PoseStream {
    /// Stream with root motion only.
    pub fn from_root(fps: f64, root: Vec<Vec3>, orientation: Vec<Quat>) -> Self {
        PoseStream {
            fps,
            joint_names: Vec::new(),
            joints: vec![Vec::new(); root.len()],
            root,
            orientation,
            bbox_area: None,
            confidence: None,
            full_body: None,
            video_height: None,
        }
    }

    pub fn len(&self) -> usize {
        self.root.len()
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0) {
            return Err(Error::Validation("fps must be positive".into()));
        }
        let n = self.len();
        if n == 0 {
            return Err(Error::Validation("stream has no frames".into()));
        }
        if self.orientation.len() != n || self.joints.len() != n {
            return Err(Error::Validation("stream channels differ in length".into()));
        }
        if self.joints.iter().any(|j| j.len() != self.joint_names.len()) {
            return Err(Error::Validation("joint count differs from joint names".into()));
        }
        let bad = self.bbox_area.as_ref().is_some_and(|v| v.len() != n)
            || self.confidence.as_ref().is_some_and(|v| v.len() != n)
            || self.full_body.as_ref().is_some_and(|v| v.len() != n);
        if bad {
            return Err(Error::Validation("detection channels differ in length".into()));
        }
        Ok(())
    }

    /// Root followed by joints: every tracked point of frame `f`.
    fn points(&self, f: usize) -> impl Iterator<Item = Vec3> + '_ {
        std::iter::once(self.root[f]).chain(self.joints[f].iter().copied())
    }

    fn max_displacement(&self, a: usize, b: usize) -> f64 {
        self.points(a).zip(self.points(b)).map(|(p, q)| p.dist(q)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    ShortClip,
    LowRes,
    SmallBbox,
    LowConfidence,
    AbruptMotion,
    StaticMotion,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::ShortClip => "short_clip",
            Reason::LowRes => "low_res",
            Reason::SmallBbox => "small_bbox",
            Reason::LowConfidence => "low_confidence",
            Reason::AbruptMotion => "abrupt_motion",
            Reason::StaticMotion => "static_motion",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterVerdict {
    pub kept: bool,
    pub reason: Option<Reason>,
}

impl FilterVerdict {
    pub const KEPT: FilterVerdict = FilterVerdict { kept: true, reason: None };

    pub fn rejected(r: Reason) -> Self {
        FilterVerdict { kept: false, reason: Some(r) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcConfig {
    pub fps: f64,
    pub min_len_s: f64,
    pub max_len_s: f64,
    pub min_video_height: u32,
    pub area_min: f64,
    pub conf_min: f64,
    pub full_body_ratio_min: f64,
    /// Per-frame displacement that marks a frame as a discontinuity (m/frame).
    pub discontinuity_threshold: f64,
    pub jump_translation_max: f64,
    pub jump_rotation_max: f64,
    pub static_speed_min: f64,
    pub window: usize,
    /// Longest run of invalid frames bridged by interpolation.
    pub max_repair_span: usize,
}

impl Default for ProcConfig {
    fn default() -> Self {
        ProcConfig {
            fps: 30.0,
            min_len_s: 2.0,
            max_len_s: 30.0,
            min_video_height: 360,
            area_min: 5000.0,
            conf_min: 0.5,
            full_body_ratio_min: 0.8,
            discontinuity_threshold: 0.15,
            jump_translation_max: 0.5,
            jump_rotation_max: std::f64::consts::FRAC_PI_4,
            static_speed_min: 0.05,
            window: 5,
            max_repair_span: 10,
        }
    }
}

/// Frame ranges `[start, end)` of usable chunks: short shots dropped, long ones split.
pub fn segment_clips(shots: &[(f64, f64)], min_len: f64, max_len: f64, fps: f64) -> Vec<(u64, u64)> {
    let min_f = (min_len * fps).round() as u64;
    let max_f = ((max_len * fps).round() as u64).max(1);
    let mut out = Vec::new();
    for &(s, e) in shots {
        if !(e > s) {
            continue;
        }
        let (a, b) = ((s * fps).round() as u64, (e * fps).round() as u64);
        let mut cur = a;
        while cur < b {
            let end = (cur + max_f).min(b);
            if end - cur >= min_f {
                out.push((cur, end));
            }
            cur = end;
        }
    }
    out
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

pub fn bbox_confidence_filter(stream: &PoseStream, cfg: &ProcConfig) -> Result<FilterVerdict> {
    let (Some(area), Some(conf)) = (&stream.bbox_area, &stream.confidence) else {
        return Err(Error::arg("stream lacks bbox or confidence channels"));
    };
    if area.is_empty() {
        return Err(Error::arg("stream has no frames"));
    }
    if stream.video_height.is_some_and(|h| h < cfg.min_video_height) {
        return Ok(FilterVerdict::rejected(Reason::LowRes));
    }
    if median(area) < cfg.area_min {
        return Ok(FilterVerdict::rejected(Reason::SmallBbox));
    }
    let all: Vec<f64> = conf.iter().flatten().copied().collect();
    let mean = if all.is_empty() { 0.0 } else { all.iter().sum::<f64>() / all.len() as f64 };
    if mean < cfg.conf_min {
        return Ok(FilterVerdict::rejected(Reason::LowConfidence));
    }
    if let Some(fb) = &stream.full_body {
        let ratio = fb.iter().filter(|b| **b).count() as f64 / fb.len().max(1) as f64;
        if ratio < cfg.full_body_ratio_min {
            return Ok(FilterVerdict::rejected(Reason::LowConfidence));
        }
    }
    Ok(FilterVerdict::KEPT)
}

pub fn motion_sanity_filter(stream: &PoseStream, cfg: &ProcConfig) -> Result<FilterVerdict> {
    let n = stream.len();
    if n < 2 {
        return Err(Error::arg("sanity filter needs at least two frames"));
    }
    for f in 1..n {
        let jump = stream.root[f].dist(stream.root[f - 1]);
        let turn = stream.orientation[f].angle_to(stream.orientation[f - 1]);
        if jump > cfg.jump_translation_max || turn > cfg.jump_rotation_max {
            return Ok(FilterVerdict::rejected(Reason::AbruptMotion));
        }
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for f in 1..n {
        for (p, q) in stream.points(f).zip(stream.points(f - 1)) {
            total += p.dist(q) * stream.fps;
            count += 1;
        }
    }
    if total / (count as f64) < cfg.static_speed_min {
        return Ok(FilterVerdict::rejected(Reason::StaticMotion));
    }
    Ok(FilterVerdict::KEPT)
}

/// Frames that jump away from the last valid frame by more than the threshold
/// (scaled by the gap) are invalid. A run longer than `max_repair_span` is taken as
/// genuine motion and accepted.
fn invalid_frames(stream: &PoseStream, cfg: &ProcConfig) -> Vec<bool> {
    let n = stream.len();
    let thr = cfg.discontinuity_threshold;
    let mut bad = vec![false; n];
    // A lone spike on the first frame shows up as a jump into and back out of it.
    let start = if n >= 3 && stream.max_displacement(0, 1) > thr && stream.max_displacement(1, 2) <= thr {
        bad[0] = true;
        1
    } else {
        0
    };
    let mut last = start;
    let mut run = 0;
    for f in start + 1..n {
        if stream.max_displacement(last, f) > thr * (f - last) as f64 && run < cfg.max_repair_span {
            bad[f] = true;
            run += 1;
        } else {
            last = f;
            run = 0;
        }
    }
    bad
}

/// Replaces discontinuous frames by interpolation between the flanking valid frames.
pub fn jitter_repair(stream: &PoseStream, cfg: &ProcConfig) -> Result<PoseStream> {
    stream.validate()?;
    let n = stream.len();
    if n < 3 {
        return Err(Error::arg("jitter repair needs at least three frames"));
    }
    let bad = invalid_frames(stream, cfg);
    if bad.iter().all(|b| *b) {
        return Err(Error::Validation("every frame is discontinuous".into()));
    }
    let mut out = stream.clone();
    let mut f = 0;
    while f < n {
        if !bad[f] {
            f += 1;
            continue;
        }
        let a = f;
        while f < n && bad[f] {
            f += 1;
        }
        let b = f; // first valid after the run
        let left = a.checked_sub(1);
        let right = (b < n).then_some(b);
        match (left, right) {
            (Some(l), Some(r)) => {
                let mut knots: Vec<usize> = Vec::new();
                if l >= 1 && !bad[l - 1] {
                    knots.push(l - 1);
                }
                knots.push(l);
                knots.push(r);
                if r + 1 < n && !bad[r + 1] {
                    knots.push(r + 1);
                }
                let xs: Vec<f64> = knots.iter().map(|k| *k as f64).collect();
                let pts = stream.points(0).count();
                for p in 0..pts {
                    let ys: Vec<Vec3> = knots.iter().map(|k| stream.points(*k).nth(p).unwrap()).collect();
                    let curve = PchipVec3::new(&xs, &ys)?;
                    for g in a..b {
                        let v = curve.eval(g as f64);
                        if p == 0 {
                            out.root[g] = v;
                        } else {
                            out.joints[g][p - 1] = v;
                        }
                    }
                }
                for g in a..b {
                    let t = (g - l) as f64 / (r - l) as f64;
                    out.orientation[g] = stream.orientation[l].slerp(stream.orientation[r], t);
                }
            }
            (Some(k), None) | (None, Some(k)) => {
                for g in a..b {
                    out.root[g] = stream.root[k];
                    out.joints[g] = stream.joints[k].clone();
                    out.orientation[g] = stream.orientation[k];
                }
            }
            (None, None) => unreachable!("some frame is valid"),
        }
    }
    Ok(out)
}

/// Centered moving average; windows shrink symmetrically near the ends.
pub fn smooth_stream(stream: &PoseStream, window: usize) -> Result<PoseStream> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::arg(format!("smoothing window must be odd and at least 3, got {window}")));
    }
    stream.validate()?;
    let n = stream.len();
    let h = window / 2;
    let mut out = stream.clone();
    for f in 0..n {
        let r = h.min(f).min(n - 1 - f);
        let span = f - r..=f + r;
        let k = (2 * r + 1) as f64;
        out.root[f] = span.clone().fold(Vec3::ZERO, |acc, g| acc + stream.root[g]) / k;
        for j in 0..stream.joint_names.len() {
            out.joints[f][j] = span.clone().fold(Vec3::ZERO, |acc, g| acc + stream.joints[g][j]) / k;
        }
        let pivot = stream.orientation[f];
        let sum = span.fold(Quat::new(0.0, 0.0, 0.0, 0.0), |acc, g| {
            let q = stream.orientation[g];
            acc.add(if q.dot(pivot) < 0.0 { q.neg() } else { q })
        });
        out.orientation[f] = sum.normalized().unwrap_or(pivot);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Processed {
    pub verdict: FilterVerdict,
    pub stream: Option<PoseStream>,
}

/// Detection filter, repair, motion sanity, smoothing.
pub fn process_stream(stream: &PoseStream, cfg: &ProcConfig) -> Result<Processed> {
    stream.validate()?;
    let reject = |r| Ok(Processed { verdict: FilterVerdict::rejected(r), stream: None });
    if (stream.len() as f64) < cfg.min_len_s * stream.fps {
        return reject(Reason::ShortClip);
    }
    if stream.bbox_area.is_some() && stream.confidence.is_some() {
        let v = bbox_confidence_filter(stream, cfg)?;
        if !v.kept {
            return Ok(Processed { verdict: v, stream: None });
        }
    } else if stream.video_height.is_some_and(|h| h < cfg.min_video_height) {
        return reject(Reason::LowRes);
    }
    let repaired = jitter_repair(stream, cfg)?;
    let v = motion_sanity_filter(&repaired, cfg)?;
    if !v.kept {
        return Ok(Processed { verdict: v, stream: None });
    }
    Ok(Processed { verdict: FilterVerdict::KEPT, stream: Some(smooth_stream(&repaired, cfg.window)?) })
}

/// One manifest line: `name<TAB>kept|rejected<TAB>reason`.
pub fn manifest_line(name: &str, v: &FilterVerdict) -> String {
    match v.reason {
        None => format!("{name}\tkept\t-"),
        Some(r) => format!("{name}\trejected\t{r}"),
    }
}
