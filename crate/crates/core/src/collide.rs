//! Oriented-box overlap, translational sweeps and track validation.
//!
//! A box translated without rotation sweeps a convex volume whose face normals are
//! among the 15 separating axes of the pair, so intersecting one slab per axis gives
//! the exact contact interval of a segment.

use crate::error::{Error, Result};
use crate::scene::{fmt3, inflate_box, ObjectState, OrientedBox, SceneState, Vec3};
use crate::traj::{ControlTrack, Frame};
use std::collections::{BTreeMap, BTreeSet};

/// Safety envelope added around every obstacle.
pub const DEFAULT_MARGIN: f64 = 0.2;
/// Horizontal radius around grasp and place points checked at zero margin.
pub const DEFAULT_ENDPOINT_REACH: f64 = 1.0;
/// Penetration depth below which a bare-obstacle overlap is not a hard contact.
pub const CONTACT_TOLERANCE: f64 = 0.005;
/// Colliding frame spans closer than this many frames are merged.
pub const SEGMENT_MERGE_GAP: Frame = 5;

const AXIS_EPS: f64 = 1e-9;

fn sat_axes(a: &OrientedBox, b: &OrientedBox) -> Vec<Vec3> {
    let ra = a.rotation();
    let rb = b.rotation();
    let mut axes = Vec::with_capacity(15);
    for i in 0..3 {
        axes.push(ra.col(i));
        axes.push(rb.col(i));
    }
    for i in 0..3 {
        for j in 0..3 {
            let c = ra.col(i).cross(rb.col(j));
            let n = c.norm();
            if n > AXIS_EPS {
                axes.push(c / n);
            }
        }
    }
    axes
}

/// Solid-box overlap by the separating-axis test. Touching boxes intersect.
pub fn boxes_intersect(a: &OrientedBox, b: &OrientedBox) -> bool {
    let d = b.center - a.center;
    sat_axes(a, b)
        .into_iter()
        .all(|l| d.dot(l).abs() <= a.projected_radius(l) + b.projected_radius(l))
}

/// Parameter interval `t in [0, 1]` during which `moving`, translated by `t * delta`,
/// intersects `obstacle`.
pub fn sweep_interval(moving: &OrientedBox, delta: Vec3, obstacle: &OrientedBox) -> Option<(f64, f64)> {
    let rel = obstacle.center - moving.center;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for l in sat_axes(moving, obstacle) {
        let r = moving.projected_radius(l) + obstacle.projected_radius(l);
        let s = rel.dot(l);
        let v = delta.dot(l);
        if v.abs() < 1e-15 {
            if s.abs() > r {
                return None;
            }
            continue;
        }
        let (a, b) = ((s - r) / v, (s + r) / v);
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        lo = lo.max(a);
        hi = hi.min(b);
        if lo > hi {
            return None;
        }
    }
    Some((lo, hi))
}

/// True iff the box moved from `from` to `to` (orientation fixed) touches `obstacle`.
/// `moving`'s own center is ignored.
pub fn segment_swept_box(moving: &OrientedBox, from: Vec3, to: Vec3, obstacle: &OrientedBox) -> bool {
    sweep_interval(&moving.at(from), to - from, obstacle).is_some()
}

/// One object flagged by a validation.
#[derive(Debug, Clone, PartialEq)]
pub struct CollidingObject {
    pub name: String,
    pub state: ObjectState,
    /// Penetrates the bare obstacle deeper than [`CONTACT_TOLERANCE`].
    pub contact: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CollisionReport {
    /// Name of the validated object or joint.
    pub moving: String,
    pub colliding_objects: Vec<CollidingObject>,
    pub time_segments: Vec<(Frame, Frame)>,
    pub collided: bool,
}

impl CollisionReport {
    pub fn clean(moving: impl Into<String>) -> Self {
        CollisionReport { moving: moving.into(), ..Default::default() }
    }

    /// Any flagged object is physically penetrated.
    pub fn has_contact(&self) -> bool {
        self.colliding_objects.iter().any(|o| o.contact)
    }

    pub fn names(&self) -> Vec<&str> {
        self.colliding_objects.iter().map(|o| o.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    pub margin: f64,
    /// Zero-margin radius around the first and last waypoint.
    pub endpoint_reach: f64,
    /// Skip obstacles already touching the moving box at the first waypoint.
    pub skip_initial_contacts: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            margin: DEFAULT_MARGIN,
            endpoint_reach: DEFAULT_ENDPOINT_REACH,
            skip_initial_contacts: true,
        }
    }
}

/// A straight piece of motion for a box of fixed orientation.
#[derive(Debug, Clone, Copy)]
pub struct SweptSegment {
    pub shape: OrientedBox,
    pub from: Vec3,
    pub to: Vec3,
    pub frames: (Frame, Frame),
}

/// Parameter interval along `from -> to` whose horizontal distance to `anchor` is at most `reach`.
fn within_reach(from: Vec3, to: Vec3, anchor: Vec3, reach: f64) -> Option<(f64, f64)> {
    let (ux, uy) = (from.x - anchor.x, from.y - anchor.y);
    let (vx, vy) = (to.x - from.x, to.y - from.y);
    let vv = vx * vx + vy * vy;
    let uu = ux * ux + uy * uy;
    if vv < 1e-18 {
        return (uu <= reach * reach).then_some((0.0, 1.0));
    }
    let uv = ux * vx + uy * vy;
    let disc = uv * uv - vv * (uu - reach * reach);
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let (a, b) = ((-uv - sq) / vv, (-uv + sq) / vv);
    let (a, b) = (a.max(0.0), b.min(1.0));
    (a <= b).then_some((a, b))
}

/// Parts of `[lo, hi]` not covered by the closed intervals `cover`, as closed hulls.
fn subtract(lo: f64, hi: f64, cover: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut cs: Vec<(f64, f64)> = cover.to_vec();
    cs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut cur = lo;
    let mut cur_covered = false;
    for (c0, c1) in cs {
        if c1 < cur {
            continue;
        }
        if c0 > hi {
            break;
        }
        if c0 > cur {
            out.push((cur, c0));
        }
        cur = cur.max(c1);
        cur_covered = true;
        if cur >= hi {
            return out;
        }
    }
    if cur < hi || !cur_covered {
        out.push((cur, hi));
    }
    out
}

fn shrink(b: &OrientedBox, by: f64) -> OrientedBox {
    OrientedBox { sizes: b.sizes.map(|s| (s - 2.0 * by).max(1e-9)), ..*b }
}

fn frames_of(seg: &SweptSegment, t: (f64, f64)) -> (Frame, Frame) {
    let (f0, f1) = (seg.frames.0 as f64, seg.frames.1 as f64);
    let a = (f0 + t.0 * (f1 - f0)).floor().max(f0) as Frame;
    let b = (f0 + t.1 * (f1 - f0)).ceil().min(f1) as Frame;
    (a, b.max(a))
}

fn merge_spans(mut spans: Vec<(Frame, Frame)>) -> Vec<(Frame, Frame)> {
    spans.sort();
    let mut out: Vec<(Frame, Frame)> = Vec::new();
    for (a, b) in spans {
        match out.last_mut() {
            Some(last) if a < last.1 + SEGMENT_MERGE_GAP => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Validates straight segments against every non-ignored scene object.
/// `anchors` are the grasp and place points that get zero-margin treatment.
pub fn validate_segments(
    moving: &str,
    segments: &[SweptSegment],
    anchors: &[Vec3],
    scene: &SceneState,
    ignore: &BTreeSet<String>,
    opts: &ValidateOptions,
) -> Result<CollisionReport> {
    if !(opts.margin >= 0.0) {
        return Err(Error::arg("margin must be non-negative"));
    }
    let first = segments.first().map(|s| s.shape.at(s.from));
    let mut hits: BTreeMap<String, (ObjectState, bool)> = BTreeMap::new();
    let mut spans = Vec::new();
    for obj in &scene.objects {
        if ignore.contains(&obj.name) {
            continue;
        }
        if opts.skip_initial_contacts {
            if let Some(b0) = &first {
                if boxes_intersect(b0, &obj.bbox) {
                    continue;
                }
            }
        }
        let env = inflate_box(&obj.bbox, opts.margin)?;
        let core = shrink(&obj.bbox, CONTACT_TOLERANCE);
        for seg in segments {
            let start = seg.shape.at(seg.from);
            let delta = seg.to - seg.from;
            let Some(outer) = sweep_interval(&start, delta, &env) else { continue };
            let bare = sweep_interval(&start, delta, &obj.bbox);
            let deep = bare.is_some() && sweep_interval(&start, delta, &core).is_some();
            let relaxed: Vec<(f64, f64)> = anchors
                .iter()
                .filter_map(|a| within_reach(seg.from, seg.to, *a, opts.endpoint_reach))
                .collect();
            let mut pieces = subtract(outer.0, outer.1, &relaxed);
            if let Some(b) = bare {
                pieces.push(b);
            }
            if pieces.is_empty() {
                continue;
            }
            let entry = hits.entry(obj.name.clone()).or_insert_with(|| (obj.clone(), false));
            entry.1 |= deep;
            spans.extend(pieces.into_iter().map(|p| frames_of(seg, p)));
        }
    }
    let colliding_objects: Vec<CollidingObject> = hits
        .into_iter()
        .map(|(name, (state, contact))| CollidingObject { name, state, contact })
        .collect();
    Ok(CollisionReport {
        moving: moving.to_string(),
        collided: !colliding_objects.is_empty(),
        colliding_objects,
        time_segments: merge_spans(spans),
    })
}

fn track_segments(moving: &OrientedBox, track: &ControlTrack) -> Result<Vec<SweptSegment>> {
    if track.waypoints.len() < 2 {
        return Err(Error::arg(format!("track `{}` needs at least two waypoints", track.name)));
    }
    track.validate()?;
    Ok(track
        .waypoints
        .windows(2)
        .map(|w| SweptSegment {
            shape: *moving,
            from: w[0].position,
            to: w[1].position,
            frames: (w[0].frame, w[1].frame),
        })
        .collect())
}

/// Checks every inter-waypoint segment of `track` (carrying `moving`'s orientation and
/// extents) against the scene with the default endpoint relaxation.
pub fn validate_track(
    moving: &OrientedBox,
    track: &ControlTrack,
    scene: &SceneState,
    margin: f64,
    ignore: &BTreeSet<String>,
) -> Result<CollisionReport> {
    let opts = ValidateOptions { margin, ..Default::default() };
    validate_track_with(moving, track, scene, ignore, &opts)
}

pub fn validate_track_with(
    moving: &OrientedBox,
    track: &ControlTrack,
    scene: &SceneState,
    ignore: &BTreeSet<String>,
    opts: &ValidateOptions,
) -> Result<CollisionReport> {
    let segs = track_segments(moving, track)?;
    let anchors = [track.waypoints[0].position, track.waypoints.last().unwrap().position];
    validate_segments(&track.name, &segs, &anchors, scene, ignore, opts)
}

fn vec_text(v: Vec3) -> String {
    format!("[{}, {}, {}]", fmt3(v.x), fmt3(v.y), fmt3(v.z))
}

/// Planner-facing collision text. Fails on a clean report.
pub fn format_collision_error(report: &CollisionReport) -> Result<String> {
    if !report.collided {
        return Err(Error::arg("report has no collision to format"));
    }
    let mut s = format!(
        "{} was detected to collide in {} time segment(s).\nObjects involved in collision:\n",
        report.moving,
        report.time_segments.len()
    );
    let mut objs: Vec<&CollidingObject> = report.colliding_objects.iter().collect();
    objs.sort_by(|a, b| a.name.cmp(&b.name));
    for o in objs {
        s.push_str(&format!(
            "- {} at position {} with size {}\n",
            o.name,
            vec_text(o.state.bbox.center),
            vec_text(o.state.bbox.sizes)
        ));
    }
    Ok(s)
}

/// `[[frame, x, y, z], ...]` with 3-decimal coordinates.
pub fn format_track(track: &ControlTrack) -> String {
    let rows: Vec<String> = track
        .waypoints
        .iter()
        .map(|w| format!("[{}, {}, {}, {}]", w.frame, fmt3(w.position.x), fmt3(w.position.y), fmt3(w.position.z)))
        .collect();
    format!("[{}]", rows.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{HumanState, Orientation};
    use proptest::prelude::*;

    fn cube(c: Vec3) -> OrientedBox {
        OrientedBox::axis_aligned(c, Vec3::new(1.0, 1.0, 1.0))
    }

    #[test]
    fn identical_and_distant() {
        let a = cube(Vec3::ZERO);
        assert!(boxes_intersect(&a, &a));
        assert!(!boxes_intersect(&a, &cube(Vec3::new(10.0, 0.0, 0.0))));
    }

    #[test]
    fn touching_counts() {
        assert!(boxes_intersect(&cube(Vec3::ZERO), &cube(Vec3::new(1.0, 0.0, 0.0))));
        assert!(!boxes_intersect(&cube(Vec3::ZERO), &cube(Vec3::new(1.0 + 1e-9, 0.0, 0.0))));
    }

    #[test]
    fn rotated_edge_separation() {
        // Diamond of half-diagonal sqrt(0.5) reaches x = 0.5 + 0.7071.
        let d = OrientedBox::new(Vec3::new(1.2, 0.0, 0.0), Orientation::from_yaw(std::f64::consts::FRAC_PI_4), Vec3::new(1.0, 1.0, 1.0));
        assert!(boxes_intersect(&cube(Vec3::ZERO), &d));
        let far = d.translated(Vec3::new(0.02, 0.0, 0.0));
        assert!(!boxes_intersect(&cube(Vec3::ZERO), &far));
    }

    #[test]
    fn sweep_basics() {
        let m = cube(Vec3::ZERO);
        let obs = cube(Vec3::new(5.0, 0.0, 0.0));
        assert!(segment_swept_box(&m, Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0), &obs));
        assert!(!segment_swept_box(&m, Vec3::new(0.0, 3.0, 0.0), Vec3::new(10.0, 3.0, 0.0), &obs));
        let (a, b) = sweep_interval(&m, Vec3::new(10.0, 0.0, 0.0), &obs).unwrap();
        assert!((a - 0.4).abs() < 1e-12 && (b - 0.6).abs() < 1e-12);
    }

    #[test]
    fn reach_interval() {
        let r = within_reach(Vec3::new(-2.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0), Vec3::ZERO, 1.0).unwrap();
        assert!((r.0 - 0.25).abs() < 1e-12 && (r.1 - 0.75).abs() < 1e-12);
        assert!(within_reach(Vec3::new(-2.0, 2.0, 0.0), Vec3::new(2.0, 2.0, 0.0), Vec3::ZERO, 1.0).is_none());
    }

    #[test]
    fn subtract_cases() {
        assert_eq!(subtract(0.0, 1.0, &[]), vec![(0.0, 1.0)]);
        assert!(subtract(0.2, 0.4, &[(0.0, 0.5)]).is_empty());
        assert_eq!(subtract(0.0, 1.0, &[(0.0, 0.3), (0.6, 1.0)]), vec![(0.3, 0.6)]);
        assert_eq!(subtract(0.0, 1.0, &[(0.5, 0.7)]), vec![(0.0, 0.5), (0.7, 1.0)]);
    }

    #[test]
    fn empty_scene_track_is_clean() {
        let scene = SceneState::new(HumanState::standing(Vec3::ZERO), vec![]);
        let t = ControlTrack::from_rows("box", &[[0.0, 0.0, 0.0, 0.5], [30.0, 3.0, 0.0, 0.5]]);
        let r = validate_track(&cube(Vec3::ZERO), &t, &scene, 0.2, &BTreeSet::new()).unwrap();
        assert!(!r.collided && r.time_segments.is_empty());
        let short = ControlTrack::from_rows("box", &[[0.0, 0.0, 0.0, 0.5]]);
        assert!(validate_track(&cube(Vec3::ZERO), &short, &scene, 0.2, &BTreeSet::new()).is_err());
    }

    #[test]
    fn format_requires_collision() {
        assert!(format_collision_error(&CollisionReport::clean("x")).is_err());
        let obj = ObjectState::new("crate", cube(Vec3::new(1.0, 2.0, 0.5)));
        let r = CollisionReport {
            moving: "box".into(),
            colliding_objects: vec![CollidingObject { name: "crate".into(), state: obj, contact: true }],
            time_segments: vec![(3, 9)],
            collided: true,
        };
        let text = format_collision_error(&r).unwrap();
        assert_eq!(
            text,
            "box was detected to collide in 1 time segment(s).\nObjects involved in collision:\n\
             - crate at position [1.0, 2.0, 0.5] with size [1.0, 1.0, 1.0]\n"
        );
    }

    #[test]
    fn merging_spans() {
        assert_eq!(merge_spans(vec![(10, 12), (0, 3), (7, 8)]), vec![(0, 12)]);
        assert_eq!(merge_spans(vec![(0, 3), (9, 12)]), vec![(0, 3), (9, 12)]);
    }

    fn arb_box() -> impl Strategy<Value = OrientedBox> {
        (
            (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0),
            (-3.2f64..3.2, -1.5f64..1.5, -3.2f64..3.2),
            (0.1f64..2.0, 0.1f64..2.0, 0.1f64..2.0),
        )
            .prop_map(|(c, e, s)| {
                OrientedBox::new(Vec3::new(c.0, c.1, c.2), Orientation::from_euler([e.0, e.1, e.2]), Vec3::new(s.0, s.1, s.2))
            })
    }

    proptest! {
        #[test]
        fn symmetric(a in arb_box(), b in arb_box()) {
            prop_assert_eq!(boxes_intersect(&a, &b), boxes_intersect(&b, &a));
        }

        #[test]
        fn inflation_keeps_contact(a in arb_box(), b in arb_box(), m in 0.0f64..1.0) {
            if boxes_intersect(&a, &b) {
                prop_assert!(boxes_intersect(&inflate_box(&a, m).unwrap(), &b));
            }
        }

        #[test]
        fn sweep_covers_samples(a in arb_box(), b in arb_box(), dx in -4.0f64..4.0, dy in -4.0f64..4.0) {
            let d = Vec3::new(dx, dy, 0.0);
            let swept = sweep_interval(&a, d, &b);
            for k in 0..=20 {
                let t = k as f64 / 20.0;
                if boxes_intersect(&a.translated(d * t), &b) {
                    prop_assert!(swept.is_some());
                    let (lo, hi) = swept.unwrap();
                    prop_assert!(t >= lo - 1e-9 && t <= hi + 1e-9);
                }
            }
        }
    }
}
