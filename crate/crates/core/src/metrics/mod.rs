//! HOI evaluation: contact agreement, hand penetration, foot contact, keyframe tracking
//! and agent-episode success.

mod sdf;

pub use sdf::{Sdf, VoxelSdf, DEFAULT_VOXELS};

use crate::error::{Error, Result};
use crate::executor::{Joint, MotionClip};
use crate::planner::{EpisodeLog, Outcome};
use crate::scene::{Orientation, Vec3};
use crate::traj::{box_surface_points, ControlTrack};
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const CONTACT_THRESHOLD: f64 = 0.05;
pub const PENETRATION_DEPTH: f64 = 0.04;
pub const FOOT_CONTACT_HEIGHT: f64 = 0.05;
pub const SUCCESS_THRESHOLDS: [f64; 2] = [0.5, 0.2];
pub const POSITION_TOLERANCE: f64 = 0.05;
pub const ORIENTATION_TOLERANCE: f64 = 0.1;
pub const UPRIGHT_PELVIS_BAND: (f64, f64) = (0.6, 1.2);

/// Label per frame: the hand is within `threshold` of some mesh vertex.
pub fn contact_labels(hand: &[Vec3], mesh: &[Vec<Vec3>], threshold: f64) -> Result<Vec<bool>> {
    if hand.len() != mesh.len() {
        return Err(Error::arg(format!("hand track has {} frames, mesh has {}", hand.len(), mesh.len())));
    }
    hand.iter()
        .zip(mesh)
        .map(|(h, verts)| {
            if verts.is_empty() {
                return Err(Error::arg("object mesh has no vertices"));
            }
            Ok(verts.iter().any(|v| v.dist(*h) <= threshold))
        })
        .collect()
}

/// Per-frame contact labels; a frame is in contact when either hand is.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContactSeries {
    pub frames: Vec<bool>,
}

impl ContactSeries {
    pub fn new(frames: Vec<bool>) -> Self {
        ContactSeries { frames }
    }

    pub fn from_hands(left: &[bool], right: &[bool]) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::arg("hand label series differ in length"));
        }
        Ok(ContactSeries { frames: left.iter().zip(right).map(|(a, b)| *a || *b).collect() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub percent: f64,
}

pub fn contact_prf(pred: &ContactSeries, reference: &ContactSeries) -> Result<ContactScores> {
    if pred.frames.len() != reference.frames.len() {
        return Err(Error::arg("contact series differ in length"));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (p, r) in pred.frames.iter().zip(&reference.frames) {
        match (p, r) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fneg == 0 { 1.0 } else { tp as f64 / (tp + fneg) as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(ContactScores { precision, recall, f1, percent: contact_percent(pred) })
}

/// Fraction of frames in predicted contact; zero for an empty series.
pub fn contact_percent(pred: &ContactSeries) -> f64 {
    if pred.frames.is_empty() {
        return 0.0;
    }
    pred.frames.iter().filter(|b| **b).count() as f64 / pred.frames.len() as f64
}

/// Per-sequence scores averaged.
pub fn mean_contact(scores: &[ContactScores]) -> Option<ContactScores> {
    if scores.is_empty() {
        return None;
    }
    let n = scores.len() as f64;
    let sum = |f: fn(&ContactScores) -> f64| scores.iter().map(f).sum::<f64>() / n;
    Some(ContactScores {
        precision: sum(|s| s.precision),
        recall: sum(|s| s.recall),
        f1: sum(|s| s.f1),
        percent: sum(|s| s.percent),
    })
}

/// Fraction of frames with a vertex deeper than `depth` inside the object.
pub fn penetration_score(frames: &[Vec<Vec3>], sdf: &dyn Sdf, depth: f64) -> f64 {
    if frames.is_empty() {
        return 0.0;
    }
    let hit = frames
        .iter()
        .filter(|verts| {
            verts.iter().any(|v| {
                let d = sdf.distance(*v);
                d < 0.0 && -d > depth
            })
        })
        .count();
    hit as f64 / frames.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajScores {
    /// `(threshold, success fraction)` pairs.
    pub success: Vec<(f64, f64)>,
    pub mpjpe_mm: f64,
    pub max_error: f64,
}

impl TrajScores {
    pub fn success_at(&self, tau: f64) -> Option<f64> {
        self.success.iter().find(|(t, _)| *t == tau).map(|(_, s)| *s)
    }

    pub fn error_at(&self, tau: f64) -> Option<f64> {
        self.success_at(tau).map(|s| 1.0 - s)
    }
}

/// Keyframe errors of every control waypoint against the clip.
fn keyframe_errors(clip: &MotionClip, controls: &[ControlTrack]) -> Result<Vec<f64>> {
    let mut errs = Vec::new();
    for t in controls {
        if Joint::parse(&t.name).is_none() && !clip.object_tracks.contains_key(&t.name) {
            return Err(Error::arg(format!("control `{}` is not in the clip", t.name)));
        }
        for w in &t.waypoints {
            let p = clip
                .position_of(&t.name, w.frame)
                .ok_or_else(|| Error::arg(format!("frame {} of `{}` is outside the clip", w.frame, t.name)))?;
            errs.push(p.dist(w.position));
        }
    }
    Ok(errs)
}

pub fn traj_metrics(clip: &MotionClip, controls: &[ControlTrack], thresholds: &[f64]) -> Result<TrajScores> {
    traj_metrics_batch(&[(clip, controls)], thresholds)
}

/// Success per sequence from its maximum keyframe error; MPJPE over all keyframes.
pub fn traj_metrics_batch(seqs: &[(&MotionClip, &[ControlTrack])], thresholds: &[f64]) -> Result<TrajScores> {
    let mut maxes = Vec::new();
    let mut all = Vec::new();
    for (clip, controls) in seqs {
        let e = keyframe_errors(clip, controls)?;
        maxes.push(e.iter().copied().fold(0.0, f64::max));
        all.extend(e);
    }
    let n = maxes.len().max(1) as f64;
    let success = thresholds
        .iter()
        .map(|&tau| (tau, maxes.iter().filter(|m| **m < tau).count() as f64 / n))
        .collect();
    let mpjpe_mm = if all.is_empty() { 0.0 } else { 1000.0 * all.iter().sum::<f64>() / all.len() as f64 };
    Ok(TrajScores { success, mpjpe_mm, max_error: maxes.iter().copied().fold(0.0, f64::max) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootScores {
    pub sliding: f64,
    pub height: f64,
}

/// Sliding over frames where a foot is within contact height; mean lowest-foot height.
pub fn foot_metrics(clip: &MotionClip, ground_z: f64) -> FootScores {
    let mut slide = 0.0;
    let mut count = 0usize;
    for w in clip.frames.windows(2) {
        for (a, b) in [(w[0].left_foot, w[1].left_foot), (w[0].right_foot, w[1].right_foot)] {
            if b.z - ground_z < FOOT_CONTACT_HEIGHT {
                slide += a.dist_xy(b);
                count += 1;
            }
        }
    }
    let height = if clip.frames.is_empty() {
        0.0
    } else {
        clip.frames.iter().map(|f| f.left_foot.z.min(f.right_foot.z) - ground_z).sum::<f64>() / clip.frames.len() as f64
    };
    FootScores { sliding: if count == 0 { 0.0 } else { slide / count as f64 }, height }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetPose {
    pub object: String,
    pub position: Vec3,
    /// Without one, the object only has to stay upright.
    pub orientation: Option<Orientation>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub position: f64,
    pub orientation: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { position: POSITION_TOLERANCE, orientation: ORIENTATION_TOLERANCE }
    }
}

/// Completed episode, object within tolerance of the target, pelvis at standing height.
pub fn agent_success(log: &EpisodeLog, target: &TargetPose, tol: &Tolerance) -> bool {
    if log.outcome != Some(Outcome::Completed) {
        return false;
    }
    let Some(obj) = log.final_scene.object(&target.object) else { return false };
    if obj.bbox.center.dist(target.position) > tol.position {
        return false;
    }
    let q = obj.bbox.orientation.quat;
    let ori_ok = match &target.orientation {
        Some(o) => q.angle_to(o.quat) <= tol.orientation,
        None => {
            let up = q.rotate(Vec3::new(0.0, 0.0, 1.0));
            up.z.clamp(-1.0, 1.0).acos() <= tol.orientation
        }
    };
    let z = log.final_scene.human.pelvis.z;
    ori_ok && (UPRIGHT_PELVIS_BAND.0..=UPRIGHT_PELVIS_BAND.1).contains(&z)
}

pub fn success_rate(results: &[bool]) -> f64 {
    if results.is_empty() {
        0.0
    } else {
        results.iter().filter(|b| **b).count() as f64 / results.len() as f64
    }
}

/// Flat report keyed by metric column names; absent metrics are omitted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub values: BTreeMap<String, f64>,
}

const COLUMN_ORDER: [&str; 12] = [
    "C_prec", "C_rec", "C_F1", "C_percent", "P_hand", "FS", "H_feet", "Succ@0.5", "Succ@0.2", "TrajErr@0.5", "TrajErr@0.2", "MPJPE",
];

impl MetricsReport {
    pub fn set(&mut self, key: &str, v: f64) {
        self.values.insert(key.to_string(), v);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for k in COLUMN_ORDER {
            if let Some(v) = self.values.get(k) {
                let _ = writeln!(s, "{k}\t{v:.6}");
            }
        }
        for (k, v) in &self.values {
            if !COLUMN_ORDER.contains(&k.as_str()) {
                let _ = writeln!(s, "{k}\t{v:.6}");
            }
        }
        s
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut r = MetricsReport::default();
        for (i, l) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (k, v) = l.split_once('\t').ok_or_else(|| Error::parse(i + 1, "expected key<TAB>value"))?;
            r.set(k, v.trim().parse().map_err(|_| Error::parse(i + 1, format!("bad value `{v}`")))?);
        }
        Ok(r)
    }
}

/// Hand contact labels against the nearest carried object's surface samples per frame.
pub fn clip_contacts(clip: &MotionClip) -> ContactSeries {
    let surfaces: Vec<(&String, Vec<Vec3>)> = clip
        .object_sizes
        .iter()
        .map(|(name, size)| {
            let b = crate::scene::OrientedBox::axis_aligned(Vec3::ZERO, *size);
            (name, box_surface_points(&b, 9))
        })
        .collect();
    let frames = (0..clip.len())
        .map(|f| {
            let pose = &clip.frames[f];
            surfaces.iter().any(|(name, pts)| {
                let t = &clip.object_tracks[*name];
                let (p, q) = (t.positions[f], t.orientations[f]);
                [pose.left_hand, pose.right_hand].iter().any(|h| {
                    let local = q.conj().rotate(*h - p);
                    pts.iter().any(|v| v.dist(local) <= CONTACT_THRESHOLD)
                })
            })
        })
        .collect();
    ContactSeries { frames }
}

/// Fraction of frames with a hand deeper than the penetration depth in any object.
pub fn clip_penetration(clip: &MotionClip) -> Result<f64> {
    let mut hit = vec![false; clip.len()];
    for (name, size) in &clip.object_sizes {
        let local = crate::scene::OrientedBox::axis_aligned(Vec3::ZERO, *size);
        let sdf = VoxelSdf::from_box(&local, DEFAULT_VOXELS, 0.1)?;
        let t = &clip.object_tracks[name];
        let frames: Vec<Vec<Vec3>> = (0..clip.len())
            .map(|f| {
                let (p, q) = (t.positions[f], t.orientations[f]);
                let pose = &clip.frames[f];
                vec![q.conj().rotate(pose.left_hand - p), q.conj().rotate(pose.right_hand - p)]
            })
            .collect();
        for (f, verts) in frames.iter().enumerate() {
            if penetration_score(std::slice::from_ref(verts), &sdf, PENETRATION_DEPTH) > 0.0 {
                hit[f] = true;
            }
        }
    }
    Ok(if hit.is_empty() { 0.0 } else { hit.iter().filter(|b| **b).count() as f64 / hit.len() as f64 })
}

/// Full report over clips; contact agreement needs `references` aligned with `clips`.
pub fn evaluate(clips: &[MotionClip], references: Option<&[MotionClip]>) -> Result<MetricsReport> {
    if clips.is_empty() {
        return Err(Error::arg("no clips to evaluate"));
    }
    if let Some(r) = references {
        if r.len() != clips.len() {
            return Err(Error::arg(format!("{} clips but {} references", clips.len(), r.len())));
        }
    }
    let n = clips.len() as f64;
    let mut report = MetricsReport::default();
    let mut scores = Vec::new();
    let (mut pct, mut pen, mut fs, mut hf) = (0.0, 0.0, 0.0, 0.0);
    for (i, c) in clips.iter().enumerate() {
        let pred = clip_contacts(c);
        pct += contact_percent(&pred);
        if let Some(refs) = references {
            scores.push(contact_prf(&pred, &clip_contacts(&refs[i]))?);
        }
        pen += clip_penetration(c)?;
        let f = foot_metrics(c, 0.0);
        fs += f.sliding;
        hf += f.height;
    }
    if let Some(m) = mean_contact(&scores) {
        report.set("C_prec", m.precision);
        report.set("C_rec", m.recall);
        report.set("C_F1", m.f1);
    }
    report.set("C_percent", pct / n);
    report.set("P_hand", pen / n);
    report.set("FS", fs / n);
    report.set("H_feet", hf / n);
    let seqs: Vec<(&MotionClip, &[ControlTrack])> = clips.iter().map(|c| (c, c.controls.as_slice())).collect();
    let t = traj_metrics_batch(&seqs, &SUCCESS_THRESHOLDS)?;
    for tau in SUCCESS_THRESHOLDS {
        report.set(&format!("Succ@{tau}"), t.success_at(tau).unwrap());
        report.set(&format!("TrajErr@{tau}"), t.error_at(tau).unwrap());
    }
    report.set("MPJPE", t.mpjpe_mm);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::{FramePose, KinematicExecutor, MotionArgs};
    use crate::scene::{HumanState, OrientedBox, Quat, SceneState};
    use crate::traj::Waypoint;
    use proptest::prelude::*;

    fn series(bits: &[u8]) -> ContactSeries {
        ContactSeries::new(bits.iter().map(|b| *b == 1).collect())
    }

    #[test]
    fn labels_at_threshold() {
        let mesh = vec![vec![Vec3::ZERO]; 3];
        let hand = [Vec3::new(0.03, 0.0, 0.0), Vec3::new(0.07, 0.0, 0.0), Vec3::ZERO];
        assert_eq!(contact_labels(&hand, &mesh, CONTACT_THRESHOLD).unwrap(), vec![true, false, true]);
        assert_eq!(contact_labels(&hand[2..], &mesh[2..], 0.0).unwrap(), vec![true]);
        assert!(contact_labels(&hand[..1], &[vec![]], 0.05).is_err());
    }

    #[test]
    fn prf_hand_counted() {
        let s = contact_prf(&series(&[1, 1, 0, 0]), &series(&[1, 0, 1, 0])).unwrap();
        assert_eq!((s.precision, s.recall, s.f1, s.percent), (0.5, 0.5, 0.5, 0.5));
        let id = contact_prf(&series(&[1, 0, 1]), &series(&[1, 0, 1])).unwrap();
        assert_eq!((id.precision, id.recall, id.f1), (1.0, 1.0, 1.0));
        let none = contact_prf(&series(&[0, 0]), &series(&[0, 0])).unwrap();
        assert_eq!((none.precision, none.recall, none.f1), (1.0, 1.0, 1.0));
        let miss = contact_prf(&series(&[0, 0]), &series(&[1, 0])).unwrap();
        assert_eq!((miss.precision, miss.recall), (1.0, 0.0));
    }

    #[test]
    fn penetration_rule() {
        struct Fixed(f64);
        impl Sdf for Fixed {
            fn distance(&self, _: Vec3) -> f64 {
                self.0
            }
        }
        let frame = vec![vec![Vec3::ZERO]];
        assert_eq!(penetration_score(&frame, &Fixed(-0.05), PENETRATION_DEPTH), 1.0);
        assert_eq!(penetration_score(&frame, &Fixed(-0.03), PENETRATION_DEPTH), 0.0);
        assert_eq!(penetration_score(&frame, &Fixed(0.1), PENETRATION_DEPTH), 0.0);
    }

    fn stand_clip(n: usize, foot: impl Fn(usize) -> Vec3) -> MotionClip {
        let frames = (0..n)
            .map(|f| FramePose {
                pelvis: Vec3::new(0.0, 0.0, 0.9),
                left_hand: Vec3::new(0.2, 0.2, 0.9),
                right_hand: Vec3::new(0.2, -0.2, 0.9),
                left_foot: foot(f),
                right_foot: foot(f),
                orientation: Quat::IDENTITY,
            })
            .collect();
        MotionClip {
            fps: 30.0,
            backend: "kinematic".into(),
            frames,
            object_tracks: BTreeMap::new(),
            object_sizes: BTreeMap::new(),
            grasp_events: vec![],
            controls: vec![],
        }
    }

    #[test]
    fn feet() {
        let planted = foot_metrics(&stand_clip(10, |_| Vec3::ZERO), 0.0);
        assert_eq!(planted.sliding, 0.0);
        let glide = foot_metrics(&stand_clip(10, |f| Vec3::new(0.01 * f as f64, 0.0, 0.0)), 0.0);
        assert!((glide.sliding - 0.01).abs() < 1e-12);
        let float = foot_metrics(&stand_clip(10, |_| Vec3::new(0.0, 0.0, 0.03)), 0.0);
        assert!((float.height - 0.03).abs() < 1e-12);
    }

    #[test]
    fn keyframe_success() {
        let clip = stand_clip(31, |_| Vec3::ZERO);
        let off = ControlTrack::new("pelvis", vec![Waypoint::new(0, Vec3::new(0.3, 0.0, 0.9))]);
        let t = traj_metrics(&clip, &[off], &SUCCESS_THRESHOLDS).unwrap();
        assert_eq!((t.success_at(0.5), t.success_at(0.2)), (Some(1.0), Some(0.0)));
        let mm = ControlTrack::new("pelvis", vec![Waypoint::new(5, Vec3::new(0.0, 0.01, 0.9)), Waypoint::new(30, Vec3::new(0.0, 0.0, 0.91))]);
        assert!((traj_metrics(&clip, &[mm], &SUCCESS_THRESHOLDS).unwrap().mpjpe_mm - 10.0).abs() < 1e-9);
        let ghost = ControlTrack::new("chair", vec![Waypoint::new(0, Vec3::ZERO)]);
        assert!(traj_metrics(&clip, &[ghost], &SUCCESS_THRESHOLDS).is_err());
    }

    #[test]
    fn executor_clips_track_exactly() {
        let scene = SceneState::new(HumanState::standing(Vec3::new(0.0, 0.0, 0.9)), vec![]);
        let args = MotionArgs {
            control_joints: vec!["pelvis".into()],
            control_points: vec![vec![[0.0, 0.0, 0.0, 0.9], [20.0, 0.5, 0.3, 0.9], [45.0, 1.0, 1.0, 0.95]]],
            number_frames: 50,
            ..Default::default()
        };
        let r = KinematicExecutor::default().generate_motion(&scene, &args).unwrap();
        let rep = evaluate(&[r.clip], None).unwrap();
        assert_eq!(rep.get("MPJPE"), Some(0.0));
        assert_eq!(rep.get("Succ@0.2"), Some(1.0));
        assert!(rep.get("C_prec").is_none());
        assert_eq!(MetricsReport::from_table(&rep.to_table()).unwrap().values.len(), rep.values.len());
    }

    #[test]
    fn voxel_penetration_on_box() {
        let b = OrientedBox::axis_aligned(Vec3::ZERO, Vec3::new(0.4, 0.4, 0.4));
        let sdf = VoxelSdf::from_box(&b, DEFAULT_VOXELS, 0.1).unwrap();
        assert_eq!(penetration_score(&[vec![Vec3::ZERO]], &sdf, PENETRATION_DEPTH), 1.0);
        assert_eq!(penetration_score(&[vec![Vec3::new(0.19, 0.0, 0.0)]], &sdf, PENETRATION_DEPTH), 0.0);
    }

    #[test]
    fn batch_rate() {
        let batch: Vec<bool> = (0..20).map(|i| i < 13).collect();
        assert_eq!(success_rate(&batch), 0.65);
    }

    proptest! {
        #[test]
        fn fractions_bounded(p in proptest::collection::vec(any::<bool>(), 1..40), seed in any::<u64>()) {
            let r: Vec<bool> = p.iter().enumerate().map(|(i, _)| (seed >> (i % 64)) & 1 == 1).collect();
            let s = contact_prf(&ContactSeries::new(p), &ContactSeries::new(r)).unwrap();
            for v in [s.precision, s.recall, s.f1, s.percent] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(s.f1 <= s.precision.max(s.recall) + 1e-12);
        }

        #[test]
        fn penetration_monotone(ds in proptest::collection::vec(-0.2f64..0.2, 1..30), a in 0.0f64..0.1, b in 0.0f64..0.1) {
            struct Per(Vec<f64>);
            impl Sdf for Per {
                fn distance(&self, p: Vec3) -> f64 { self.0[p.x as usize] }
            }
            let frames: Vec<Vec<Vec3>> = (0..ds.len()).map(|i| vec![Vec3::new(i as f64, 0.0, 0.0)]).collect();
            let sdf = Per(ds);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(penetration_score(&frames, &sdf, hi) <= penetration_score(&frames, &sdf, lo));
        }
    }
}
