//! World model: oriented boxes, human body state and scene snapshots.

pub mod math;
mod text;

pub use math::{wrap_angle, Mat3, Quat, Vec3};
pub use text::{emit_human_block, emit_objects_block, emit_scene_text, fmt3, parse_scene_text};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

/// Default human body volume (width, depth, height) in meters.
pub const BODY_VOLUME: Vec3 = Vec3::new(0.5, 0.4, 1.7);

/// Upper bound on hand-to-pelvis distance for a plausible body.
pub const MAX_HAND_REACH: f64 = 1.5;

/// Rotation given as intrinsic XYZ Euler angles plus the matching unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Orientation {
    pub euler: [f64; 3],
    pub quat: Quat,
}

impl From<[f64; 3]> for Orientation {
    fn from(e: [f64; 3]) -> Self {
        Orientation::from_euler(e)
    }
}

impl From<Orientation> for [f64; 3] {
    fn from(o: Orientation) -> Self {
        o.euler
    }
}

impl Default for Orientation {
    fn default() -> Self {
        Orientation::IDENTITY
    }
}

impl Orientation {
    pub const IDENTITY: Orientation = Orientation { euler: [0.0; 3], quat: Quat::IDENTITY };

    pub fn from_euler(euler: [f64; 3]) -> Self {
        Orientation { euler, quat: Quat::from_euler_xyz(euler) }
    }

    /// Panics on a zero quaternion; use [`Quat::normalized`] first for untrusted input.
    pub fn from_quat(q: Quat) -> Self {
        let quat = q.normalized().expect("zero quaternion");
        Orientation { euler: quat.to_mat3().to_euler_xyz(), quat }
    }

    pub fn from_yaw(yaw: f64) -> Self {
        Orientation::from_euler([0.0, 0.0, yaw])
    }

    pub fn matrix(&self) -> Mat3 {
        self.quat.to_mat3()
    }

    pub fn yaw(&self) -> f64 {
        self.matrix().yaw()
    }
}

/// Solid cuboid with full extents `sizes` along its local axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    #[serde(rename = "position")]
    pub center: Vec3,
    pub orientation: Orientation,
    pub sizes: Vec3,
}

impl OrientedBox {
    pub fn new(center: Vec3, orientation: Orientation, sizes: Vec3) -> Self {
        OrientedBox { center, orientation, sizes }
    }

    pub fn axis_aligned(center: Vec3, sizes: Vec3) -> Self {
        OrientedBox::new(center, Orientation::IDENTITY, sizes)
    }

    pub fn half(&self) -> Vec3 {
        self.sizes * 0.5
    }

    pub fn rotation(&self) -> Mat3 {
        self.orientation.matrix()
    }

    pub fn translated(&self, d: Vec3) -> OrientedBox {
        OrientedBox { center: self.center + d, ..*self }
    }

    pub fn at(&self, center: Vec3) -> OrientedBox {
        OrientedBox { center, ..*self }
    }

    /// World-space point from box-local coordinates.
    pub fn to_world(&self, local: Vec3) -> Vec3 {
        self.orientation.quat.rotate(local) + self.center
    }

    pub fn to_local(&self, world: Vec3) -> Vec3 {
        self.rotation().transpose().mul_vec(world - self.center)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let l = self.to_local(p);
        let h = self.half();
        l.x.abs() <= h.x && l.y.abs() <= h.y && l.z.abs() <= h.z
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let h = self.half();
        let mut out = [Vec3::ZERO; 8];
        for (i, c) in out.iter_mut().enumerate() {
            let s = |bit: usize| if i & bit == 0 { -1.0 } else { 1.0 };
            *c = self.to_world(Vec3::new(s(1) * h.x, s(2) * h.y, s(4) * h.z));
        }
        out
    }

    /// Half-extent of the box projected on a unit axis.
    pub fn projected_radius(&self, axis: Vec3) -> f64 {
        let r = self.rotation();
        let h = self.half();
        (0..3).map(|i| h[i] * r.col(i).dot(axis).abs()).sum()
    }
}

/// Grows every full extent by `2 * margin`.
pub fn inflate_box(b: &OrientedBox, margin: f64) -> Result<OrientedBox> {
    if !(margin >= 0.0) {
        return Err(Error::arg(format!("margin must be non-negative, got {margin}")));
    }
    Ok(OrientedBox { sizes: b.sizes + Vec3::new(margin, margin, margin) * 2.0, ..*b })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub name: String,
    #[serde(flatten)]
    pub bbox: OrientedBox,
}

impl ObjectState {
    pub fn new(name: impl Into<String>, bbox: OrientedBox) -> Self {
        ObjectState { name: name.into(), bbox }
    }
}

fn default_body_volume() -> Vec3 {
    BODY_VOLUME
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanState {
    pub pelvis: Vec3,
    pub left_hand: Vec3,
    pub right_hand: Vec3,
    pub orientation: Orientation,
    #[serde(default = "default_body_volume")]
    pub body_volume: Vec3,
}

impl HumanState {
    pub fn new(pelvis: Vec3, left_hand: Vec3, right_hand: Vec3, orientation: Orientation) -> Self {
        HumanState { pelvis, left_hand, right_hand, orientation, body_volume: BODY_VOLUME }
    }

    /// Human standing at `pelvis` with hands half a shoulder-width to each side.
    pub fn standing(pelvis: Vec3) -> Self {
        let l = pelvis + Vec3::new(0.0, 0.2, 0.0);
        let r = pelvis + Vec3::new(0.0, -0.2, 0.0);
        HumanState::new(pelvis, l, r, Orientation::IDENTITY)
    }

    pub fn validate(&self) -> Result<()> {
        for (label, v) in
            [("pelvis", self.pelvis), ("left hand", self.left_hand), ("right hand", self.right_hand)]
        {
            if !v.is_finite() {
                return Err(Error::Validation(format!("{label} position is not finite")));
            }
        }
        for (label, hand) in [("left hand", self.left_hand), ("right hand", self.right_hand)] {
            let d = hand.dist(self.pelvis);
            if d >= MAX_HAND_REACH {
                return Err(Error::Validation(format!(
                    "{label} is {d:.3} m from the pelvis (limit {MAX_HAND_REACH} m)"
                )));
            }
        }
        if self.body_volume.min_component() <= 0.0 || !self.body_volume.is_finite() {
            return Err(Error::Validation("body volume must be positive".into()));
        }
        Ok(())
    }
}

/// Upright body volume standing on the ground under the pelvis, inflated by `margin`.
/// Negative margins are treated as zero.
pub fn human_box(h: &HumanState, margin: f64) -> OrientedBox {
    let m = margin.max(0.0);
    let sizes = h.body_volume + Vec3::new(m, m, m) * 2.0;
    let center = Vec3::new(h.pelvis.x, h.pelvis.y, h.body_volume.z * 0.5);
    OrientedBox::new(center, Orientation::from_yaw(h.orientation.yaw()), sizes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub human: HumanState,
    #[serde(default)]
    pub objects: Vec<ObjectState>,
}

impl SceneState {
    pub fn new(human: HumanState, objects: Vec<ObjectState>) -> Self {
        SceneState { human, objects }
    }

    pub fn object(&self, name: &str) -> Option<&ObjectState> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn object_mut(&mut self, name: &str) -> Option<&mut ObjectState> {
        self.objects.iter_mut().find(|o| o.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        self.human.validate()?;
        let mut seen = HashSet::new();
        for o in &self.objects {
            if o.name.trim().is_empty() {
                return Err(Error::Validation("object with empty name".into()));
            }
            if !seen.insert(o.name.as_str()) {
                return Err(Error::Validation(format!("duplicate object name `{}`", o.name)));
            }
            let b = &o.bbox;
            if !b.center.is_finite() || !b.sizes.is_finite() {
                return Err(Error::Validation(format!("object `{}` has non-finite values", o.name)));
            }
            if b.sizes.min_component() <= 0.0 {
                return Err(Error::Validation(format!("object `{}` has non-positive size", o.name)));
            }
        }
        Ok(())
    }

    /// Axis-aligned ground rectangle `(min, max)` covering the human and every object.
    pub fn bounds_xy(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [self.human.pelvis.x, self.human.pelvis.y];
        let mut hi = lo;
        for o in &self.objects {
            for c in o.bbox.corners() {
                lo[0] = lo[0].min(c.x);
                lo[1] = lo[1].min(c.y);
                hi[0] = hi[0].max(c.x);
                hi[1] = hi[1].max(c.y);
            }
        }
        (lo, hi)
    }

    pub fn from_json(text: &str) -> Result<SceneState> {
        let s: SceneState = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }
}

/// Reads a scene from a structured JSON document or the environment-state text format.
pub fn load_scene(path: &Path) -> Result<SceneState> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        SceneState::from_json(&text)
    } else {
        parse_scene_text(&text)
    }
}
