//! Deterministic kinematic executor for `generate_motion` and `generate_interaction`.
//!
//! Controlled joints and objects follow their densified waypoint tracks. Free hands ride
//! at their initial offsets from the pelvis, turned with the body. Carried objects pick
//! up hands at the grasp frame and drag them rigidly from then on. The body faces its
//! horizontal velocity.

mod clip;

pub use clip::{load_clip, read_clip, write_clip};

use crate::collide::{
    validate_segments, validate_track_with, CollisionReport, SweptSegment, ValidateOptions,
};
use crate::error::{Error, Result};
use crate::scene::{human_box, HumanState, Orientation, Quat, SceneState, Vec3};
use crate::traj::{
    box_surface_points, densify, nearest_index, ControlTrack, DenseTrack, Frame, Waypoint,
};
use std::collections::{BTreeMap, BTreeSet};

pub const FPS: f64 = 30.0;
/// Frames over which a free hand blends onto its contact point before the grasp.
pub const REACH_BLEND_FRAMES: Frame = 15;
/// Pelvis waypoints closer than this to the carried object are pushed back.
pub const STANDOFF_TRIGGER: f64 = 0.25;
/// Distance kept between pelvis and carried object when pushed back.
pub const STANDOFF_DISTANCE: f64 = 0.5;
/// Lateral offset of each foot proxy from the pelvis.
pub const FOOT_OFFSET: f64 = 0.1;
const SURFACE_SAMPLES_PER_EDGE: usize = 9;
const YAW_SPEED_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Joint {
    Pelvis,
    LeftHand,
    RightHand,
}

impl Joint {
    pub const ALL: [Joint; 3] = [Joint::Pelvis, Joint::LeftHand, Joint::RightHand];

    pub fn name(self) -> &'static str {
        match self {
            Joint::Pelvis => "pelvis",
            Joint::LeftHand => "left_hand",
            Joint::RightHand => "right_hand",
        }
    }

    pub fn parse(s: &str) -> Option<Joint> {
        Joint::ALL.into_iter().find(|j| j.name() == s)
    }
}

/// Arguments of `generate_motion`, as written by the planner.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MotionArgs {
    pub control_joints: Vec<String>,
    /// One list of `[frame, x, y, z]` rows per joint.
    pub control_points: Vec<Vec<[f64; 4]>>,
    pub text: String,
    pub number_frames: i64,
    pub task_index: i64,
}

/// Arguments of `generate_interaction`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionArgs {
    pub motion: MotionArgs,
    pub object_name: Vec<String>,
    pub object_points: Vec<Vec<[f64; 4]>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePose {
    pub pelvis: Vec3,
    pub left_hand: Vec3,
    pub right_hand: Vec3,
    pub left_foot: Vec3,
    pub right_foot: Vec3,
    pub orientation: Quat,
}

impl FramePose {
    pub fn joint(&self, j: Joint) -> Vec3 {
        match j {
            Joint::Pelvis => self.pelvis,
            Joint::LeftHand => self.left_hand,
            Joint::RightHand => self.right_hand,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspEvent {
    pub object: String,
    pub frame: Frame,
    /// Which hands attached: `(left, right)`.
    pub hands: (bool, bool),
    /// Contact points in the object's local frame: `(left, right)`.
    pub contact_local: (Vec3, Vec3),
}

/// Dense motion at 30 fps, frame 0 through `frames.len() - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    pub fps: f64,
    pub backend: String,
    pub frames: Vec<FramePose>,
    pub object_tracks: BTreeMap<String, DenseTrack>,
    pub object_sizes: BTreeMap<String, Vec3>,
    pub grasp_events: Vec<GraspEvent>,
    /// Control tracks the clip was generated to follow.
    pub controls: Vec<ControlTrack>,
}

impl MotionClip {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Position of a joint or object at `frame`.
    pub fn position_of(&self, name: &str, frame: Frame) -> Option<Vec3> {
        let f = frame as usize;
        if let Some(j) = Joint::parse(name) {
            return self.frames.get(f).map(|p| p.joint(j));
        }
        let t = self.object_tracks.get(name)?;
        (f < t.len()).then(|| t.positions[f])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionResult {
    pub clip: MotionClip,
    pub final_scene: SceneState,
    /// One report per moved object, or the pelvis report for plain motion.
    pub collision_reports: Vec<CollisionReport>,
    /// Body sweep; informational during interactions.
    pub human_report: CollisionReport,
}

impl ExecutionResult {
    pub fn collided(&self) -> bool {
        self.collision_reports.iter().any(|r| r.collided)
    }

    /// Some flagged obstacle is penetrated, not only its envelope.
    pub fn has_contact(&self) -> bool {
        self.collision_reports.iter().any(|r| r.has_contact())
    }
}

/// Returns the scene after `result`; objects and human come from the clip's last frame.
pub fn apply_result(_scene: &SceneState, result: &ExecutionResult) -> SceneState {
    result.final_scene.clone()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecOptions {
    pub validate: ValidateOptions,
    pub standoff: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions { validate: ValidateOptions::default(), standoff: true }
    }
}

#[derive(Debug, Clone, Default)]
pub struct KinematicExecutor {
    pub opts: ExecOptions,
}

fn protocol(msg: impl Into<String>) -> Error {
    Error::Protocol(msg.into())
}

fn rows_to_track(name: &str, rows: &[[f64; 4]], number_frames: Frame) -> Result<ControlTrack> {
    if rows.is_empty() {
        return Err(protocol(format!("control track for `{name}` has no waypoints")));
    }
    let mut wps = Vec::with_capacity(rows.len());
    for r in rows {
        if r.iter().any(|v| !v.is_finite()) {
            return Err(protocol(format!("waypoint {r:?} for `{name}` is not finite")));
        }
        if r[0] < 0.0 || r[0].fract() != 0.0 {
            return Err(protocol(format!("frame index {} for `{name}` must be a non-negative integer", r[0])));
        }
        let f = r[0] as Frame;
        if f > number_frames {
            return Err(protocol(format!(
                "frame index {f} for `{name}` exceeds number_frames = {number_frames}; number_frames should be larger or equal to the largest frame_id"
            )));
        }
        wps.push(Waypoint::new(f, Vec3::new(r[1], r[2], r[3])));
    }
    for w in wps.windows(2) {
        if w[1].frame <= w[0].frame {
            return Err(protocol(format!(
                "frame indices for `{name}` must strictly increase ({} then {})",
                w[0].frame, w[1].frame
            )));
        }
    }
    Ok(ControlTrack::new(name, wps))
}

/// Dense positions over `0..=n`: held before the first and after the last waypoint.
fn dense_over(track: &ControlTrack, n: Frame, fallback: Quat) -> Result<DenseTrack> {
    let first = track.waypoints[0].frame;
    let last = track.waypoints.last().unwrap().frame;
    let len = n as usize + 1;
    let (mut pos, mut ori) = if track.waypoints.len() == 1 {
        (vec![track.waypoints[0].position], vec![track.waypoints[0].orientation.map_or(fallback, |o| o.quat)])
    } else {
        let d = densify(track, fallback)?;
        (d.positions, d.orientations)
    };
    let mut positions = vec![pos[0]; first as usize];
    let mut orientations = vec![ori[0]; first as usize];
    positions.append(&mut pos);
    orientations.append(&mut ori);
    let (lp, lq) = (*positions.last().unwrap(), *orientations.last().unwrap());
    positions.resize(len.max(last as usize + 1), lp);
    orientations.resize(len.max(last as usize + 1), lq);
    positions.truncate(len);
    orientations.truncate(len);
    Ok(DenseTrack { start_frame: 0, positions, orientations })
}

fn prepend_current(track: &mut ControlTrack, current: Vec3) {
    if track.waypoints[0].frame > 0 {
        track.waypoints.insert(0, Waypoint::new(0, current));
    }
}

fn rot_z(yaw: f64, v: Vec3) -> Vec3 {
    let (s, c) = yaw.sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

fn horizontal_unit(v: Vec3) -> Option<Vec3> {
    let n = v.x.hypot(v.y);
    (n > 1e-9).then(|| Vec3::new(v.x / n, v.y / n, 0.0))
}

/// Per-frame heading from the horizontal pelvis velocity, held through still spans.
fn headings(pelvis: &[Vec3], initial: f64) -> Vec<f64> {
    let n = pelvis.len();
    let mut out = Vec::with_capacity(n);
    let mut cur = initial;
    for f in 0..n {
        let v = if f + 1 < n { pelvis[f + 1] - pelvis[f] } else if f > 0 { pelvis[f] - pelvis[f - 1] } else { Vec3::ZERO };
        if v.x.hypot(v.y) >= YAW_SPEED_EPS {
            cur = v.y.atan2(v.x);
        }
        out.push(cur);
    }
    out
}

struct Carried {
    name: String,
    track: ControlTrack,
    dense: DenseTrack,
    grasp: Frame,
}

impl KinematicExecutor {
    pub fn new(opts: ExecOptions) -> Self {
        KinematicExecutor { opts }
    }

    pub fn generate_motion(&self, scene: &SceneState, args: &MotionArgs) -> Result<ExecutionResult> {
        self.run(scene, args, &[], &[])
    }

    pub fn generate_interaction(&self, scene: &SceneState, args: &InteractionArgs) -> Result<ExecutionResult> {
        if args.object_name.is_empty() {
            return Err(protocol("generate_interaction needs at least one object in object_name"));
        }
        self.run(scene, &args.motion, &args.object_name, &args.object_points)
    }

    fn run(
        &self,
        scene: &SceneState,
        args: &MotionArgs,
        object_names: &[String],
        object_points: &[Vec<[f64; 4]>],
    ) -> Result<ExecutionResult> {
        if args.number_frames < 1 || args.number_frames > 100_000 {
            return Err(protocol(format!("number_frames must be a positive frame count, got {}", args.number_frames)));
        }
        let n = args.number_frames as Frame;
        if args.control_joints.len() != args.control_points.len() {
            return Err(protocol(format!(
                "control_joints has {} entries but control_points has {}",
                args.control_joints.len(),
                args.control_points.len()
            )));
        }
        let mut controls: BTreeMap<Joint, ControlTrack> = BTreeMap::new();
        for (name, rows) in args.control_joints.iter().zip(&args.control_points) {
            if scene.object(name).is_some() {
                return Err(protocol(format!(
                    "`{name}` is an object, not a joint; do not put object name in control_joints"
                )));
            }
            let j = Joint::parse(name).ok_or_else(|| {
                protocol(format!("unknown joint `{name}`; control_joints must be a subset of ['pelvis','left_hand','right_hand']"))
            })?;
            if controls.contains_key(&j) {
                return Err(protocol(format!("joint `{name}` listed twice in control_joints")));
            }
            controls.insert(j, rows_to_track(name, rows, n)?);
        }
        if object_names.len() != object_points.len() {
            return Err(protocol(format!(
                "object_name has {} entries but object_points has {}",
                object_names.len(),
                object_points.len()
            )));
        }
        let mut seen = BTreeSet::new();
        let mut carried = Vec::new();
        for (name, rows) in object_names.iter().zip(object_points) {
            let obj = scene
                .object(name)
                .ok_or_else(|| protocol(format!("unknown object `{name}`; it is not in the environment")))?;
            if !seen.insert(name.clone()) {
                return Err(protocol(format!("object `{name}` listed twice in object_name")));
            }
            if rows.is_empty() {
                return Err(protocol(format!("object `{name}` has no key points in object_points")));
            }
            let track = rows_to_track(name, rows, n)?;
            let grasp = track.waypoints[0].frame;
            let q0 = obj.bbox.orientation.quat;
            let mut dense = dense_over(&track, n, q0)?;
            for f in 0..grasp as usize {
                dense.positions[f] = obj.bbox.center;
                dense.orientations[f] = q0;
            }
            carried.push(Carried { name: name.clone(), track, dense, grasp });
        }

        let human = &scene.human;
        let yaw0 = human.orientation.yaw();
        let q0 = human.orientation.quat;

        // Pelvis.
        let mut pelvis_track = controls.get(&Joint::Pelvis).cloned();
        if let Some(t) = pelvis_track.as_mut() {
            prepend_current(t, human.pelvis);
            if self.opts.standoff && !carried.is_empty() {
                apply_standoff(t, &carried);
            }
        }
        let pelvis: Vec<Vec3> = match &pelvis_track {
            Some(t) => dense_over(t, n, Quat::IDENTITY)?.positions,
            None => vec![human.pelvis; n as usize + 1],
        };
        let yaw = headings(&pelvis, yaw0);
        let len = pelvis.len();

        // Free-hand positions.
        let off_l = rot_z(-yaw0, human.left_hand - human.pelvis);
        let off_r = rot_z(-yaw0, human.right_hand - human.pelvis);
        let free = |off: Vec3| -> Vec<Vec3> { (0..len).map(|f| pelvis[f] + rot_z(yaw[f], off)).collect() };
        let mut hand_tracks: BTreeMap<Joint, ControlTrack> = BTreeMap::new();
        let mut left = match controls.get(&Joint::LeftHand) {
            Some(t) => {
                let mut t = t.clone();
                prepend_current(&mut t, human.left_hand);
                let d = dense_over(&t, n, Quat::IDENTITY)?.positions;
                hand_tracks.insert(Joint::LeftHand, t);
                d
            }
            None => free(off_l),
        };
        let mut right = match controls.get(&Joint::RightHand) {
            Some(t) => {
                let mut t = t.clone();
                prepend_current(&mut t, human.right_hand);
                let d = dense_over(&t, n, Quat::IDENTITY)?.positions;
                hand_tracks.insert(Joint::RightHand, t);
                d
            }
            None => free(off_r),
        };

        // Grasps.
        let mut grasp_events = Vec::new();
        let assign = |hand: &[Vec3]| -> Option<(usize, Vec3)> {
            let mut best: Option<(usize, Vec3, f64)> = None;
            for (k, c) in carried.iter().enumerate() {
                let g = c.grasp as usize;
                let (p, q) = (c.dense.positions[g], c.dense.orientations[g]);
                let obj = scene.object(&c.name).unwrap();
                let surface = box_surface_points(&obj.bbox, SURFACE_SAMPLES_PER_EDGE);
                let local_hand = q.conj().rotate(hand[g] - p);
                let i = nearest_index(&surface, local_hand)?;
                let d = surface[i].dist(local_hand);
                if best.as_ref().is_none_or(|b| d < b.2) {
                    best = Some((k, surface[i], d));
                }
            }
            best.map(|(k, c, _)| (k, c))
        };
        let left_grab = if hand_tracks.contains_key(&Joint::LeftHand) { None } else { assign(&left) };
        let right_grab = if hand_tracks.contains_key(&Joint::RightHand) { None } else { assign(&right) };
        for (k, c) in carried.iter().enumerate() {
            let l = left_grab.filter(|g| g.0 == k).map(|g| g.1);
            let r = right_grab.filter(|g| g.0 == k).map(|g| g.1);
            if let Some(cl) = l {
                attach(&mut left, &c.dense, c.grasp, cl);
            }
            if let Some(cr) = r {
                attach(&mut right, &c.dense, c.grasp, cr);
            }
            grasp_events.push(GraspEvent {
                object: c.name.clone(),
                frame: c.grasp,
                hands: (l.is_some(), r.is_some()),
                contact_local: (l.unwrap_or(Vec3::ZERO), r.unwrap_or(Vec3::ZERO)),
            });
        }

        // Frames.
        let frames: Vec<FramePose> = (0..len)
            .map(|f| {
                let side = rot_z(yaw[f], Vec3::new(0.0, FOOT_OFFSET, 0.0));
                let base = Vec3::new(pelvis[f].x, pelvis[f].y, 0.0);
                FramePose {
                    pelvis: pelvis[f],
                    left_hand: left[f],
                    right_hand: right[f],
                    left_foot: base + side,
                    right_foot: base - side,
                    orientation: Quat::from_yaw(yaw[f] - yaw0).mul(q0),
                }
            })
            .collect();

        // Recorded controls.
        let mut recorded = Vec::new();
        if let Some(t) = &pelvis_track {
            recorded.push(t.clone());
        }
        recorded.extend(hand_tracks.values().cloned());
        recorded.extend(carried.iter().map(|c| c.track.clone()));

        // Collision checks.
        let moved: BTreeSet<String> = carried.iter().map(|c| c.name.clone()).collect();
        let mut reports = Vec::new();
        for c in &carried {
            let obj = scene.object(&c.name).unwrap();
            let report = if c.track.waypoints.len() >= 2 {
                validate_track_with(&obj.bbox, &c.track, scene, &moved, &self.opts.validate)?
            } else {
                CollisionReport::clean(c.name.clone())
            };
            reports.push(report);
        }
        let human_report = match &pelvis_track {
            Some(t) if t.waypoints.len() >= 2 => self.validate_body(scene, human, t, &moved)?,
            _ => CollisionReport::clean("human"),
        };
        if carried.is_empty() {
            reports.push(human_report.clone());
        }

        // Final scene.
        let last = len - 1;
        let mut final_scene = scene.clone();
        let mut object_tracks = BTreeMap::new();
        let mut object_sizes = BTreeMap::new();
        for c in carried {
            let o = final_scene.object_mut(&c.name).unwrap();
            o.bbox.center = c.dense.positions[last];
            o.bbox.orientation = if c.dense.orientations[last] == o.bbox.orientation.quat {
                o.bbox.orientation
            } else {
                Orientation::from_quat(c.dense.orientations[last])
            };
            object_sizes.insert(c.name.clone(), o.bbox.sizes);
            object_tracks.insert(c.name, c.dense);
        }
        let fl = &frames[last];
        final_scene.human.pelvis = fl.pelvis;
        final_scene.human.left_hand = fl.left_hand;
        final_scene.human.right_hand = fl.right_hand;
        final_scene.human.orientation =
            if fl.orientation == q0 { human.orientation } else { Orientation::from_quat(fl.orientation) };

        Ok(ExecutionResult {
            clip: MotionClip {
                fps: FPS,
                backend: "kinematic".into(),
                frames,
                object_tracks,
                object_sizes,
                grasp_events,
                controls: recorded,
            },
            final_scene,
            collision_reports: reports,
            human_report,
        })
    }

    /// Sweeps the standing body along the pelvis track, each segment facing its travel direction.
    fn validate_body(
        &self,
        scene: &SceneState,
        human: &HumanState,
        track: &ControlTrack,
        ignore: &BTreeSet<String>,
    ) -> Result<CollisionReport> {
        let mut yaw = human.orientation.yaw();
        let mut segs = Vec::new();
        for w in track.waypoints.windows(2) {
            let d = w[1].position - w[0].position;
            if d.x.hypot(d.y) > 1e-9 {
                yaw = d.y.atan2(d.x);
            }
            let mut h = human.clone();
            h.orientation = Orientation::from_yaw(yaw);
            let shape = human_box(&h, 0.0);
            let lift = |p: Vec3| Vec3::new(p.x, p.y, shape.center.z);
            segs.push(SweptSegment { shape, from: lift(w[0].position), to: lift(w[1].position), frames: (w[0].frame, w[1].frame) });
        }
        let anchors = [track.waypoints[0].position, track.waypoints.last().unwrap().position];
        validate_segments("human", &segs, &anchors, scene, ignore, &self.opts.validate)
    }
}

/// Rigidly attaches a hand to `object` from `grasp` onward, blending in beforehand.
fn attach(hand: &mut [Vec3], object: &DenseTrack, grasp: Frame, local: Vec3) {
    let g = grasp as usize;
    for f in g..hand.len() {
        hand[f] = object.orientations[f].rotate(local) + object.positions[f];
    }
    let blend = (grasp.min(REACH_BLEND_FRAMES)) as usize;
    if blend == 0 {
        return;
    }
    let target = hand[g];
    let start = g - blend;
    for (k, h) in hand.iter_mut().enumerate().take(g).skip(start) {
        let a = (k - start) as f64 / blend as f64;
        let s = a * a * (3.0 - 2.0 * a);
        *h = h.lerp(target, s);
    }
}

/// Moves pelvis waypoints that sit on top of a carried object back along its travel direction.
fn apply_standoff(track: &mut ControlTrack, carried: &[Carried]) {
    for w in track.waypoints.iter_mut() {
        if w.frame == 0 {
            continue;
        }
        let f = w.frame as usize;
        let near = carried
            .iter()
            .filter(|c| w.frame >= c.grasp && f < c.dense.len())
            .map(|c| (c, c.dense.positions[f].dist_xy(w.position)))
            .filter(|(_, d)| *d < STANDOFF_TRIGGER)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((c, _)) = near else { continue };
        let p = c.dense.positions[f];
        let g = c.grasp as usize;
        let last = c.dense.len() - 1;
        let back = c.dense.positions[f.saturating_sub(5).max(g)];
        let ahead = c.dense.positions[(f + 5).min(last)];
        let dir = horizontal_unit(p - back).or_else(|| horizontal_unit(ahead - p));
        if let Some(d) = dir {
            w.position = Vec3::new(p.x - STANDOFF_DISTANCE * d.x, p.y - STANDOFF_DISTANCE * d.y, w.position.z);
        }
    }
}
