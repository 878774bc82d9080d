//! Environment-state text format.
//!
//! ```text
//! ***human***:
//! pelvis position: [5.043, -3.948, 0.89]
//! left hand position: [4.784, -4.039, 0.91]
//! right hand position: [4.881, -3.707, 0.903]
//! orientation: [-1.293, -1.135, -2.921]
//! ***floorlamp***:
//! position: [4.636, -3.783, 0.899]
//! orientation: [0.005, -0.008, 2.375]
//! sizes: [0.252, 0.269, 1.761]
//! ```
//!
//! The human header may be omitted when the human fields come first. Surrounding
//! quotes, blank lines and `...` elision lines are ignored.

use super::{HumanState, ObjectState, Orientation, OrientedBox, SceneState, Vec3, BODY_VOLUME};
use crate::error::{Error, Result};
use std::fmt::Write;

/// Rounds to 3 decimals and prints the shortest representation (`0.89`, `-0.0`, `2.0`).
pub fn fmt3(x: f64) -> String {
    format!("{:?}", (x * 1000.0).round() / 1000.0)
}

fn vec_text(v: [f64; 3]) -> String {
    format!("[{}, {}, {}]", fmt3(v[0]), fmt3(v[1]), fmt3(v[2]))
}

/// Human fields without the header line, newline-terminated.
pub fn emit_human_block(h: &HumanState) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "pelvis position: {}", vec_text(h.pelvis.to_array()));
    let _ = writeln!(s, "left hand position: {}", vec_text(h.left_hand.to_array()));
    let _ = writeln!(s, "right hand position: {}", vec_text(h.right_hand.to_array()));
    let _ = writeln!(s, "orientation: {}", vec_text(h.orientation.euler));
    if h.body_volume != BODY_VOLUME {
        let _ = writeln!(s, "body volume: {}", vec_text(h.body_volume.to_array()));
    }
    s
}

/// Object blocks in scene order, newline-terminated.
pub fn emit_objects_block(objects: &[ObjectState]) -> String {
    let mut s = String::new();
    for o in objects {
        let _ = writeln!(s, "***{}***:", o.name);
        let _ = writeln!(s, "position: {}", vec_text(o.bbox.center.to_array()));
        let _ = writeln!(s, "orientation: {}", vec_text(o.bbox.orientation.euler));
        let _ = writeln!(s, "sizes: {}", vec_text(o.bbox.sizes.to_array()));
    }
    s
}

pub fn emit_scene_text(scene: &SceneState) -> String {
    format!("***human***:\n{}{}", emit_human_block(&scene.human), emit_objects_block(&scene.objects))
}

fn parse_vec(raw: &str, line: usize) -> Result<[f64; 3]> {
    let t = raw.trim();
    let inner = t
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| Error::parse(line, format!("expected `[x, y, z]`, found `{t}`")))?;
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::parse(line, format!("expected 3 numbers, found {}", parts.len())));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::parse(line, format!("invalid number `{p}`")))?;
    }
    Ok(out)
}

#[derive(Default)]
struct HumanDraft {
    pelvis: Option<[f64; 3]>,
    left: Option<[f64; 3]>,
    right: Option<[f64; 3]>,
    orientation: Option<[f64; 3]>,
    volume: Option<[f64; 3]>,
    line: usize,
}

struct ObjectDraft {
    name: String,
    position: Option<[f64; 3]>,
    orientation: Option<[f64; 3]>,
    sizes: Option<[f64; 3]>,
    line: usize,
}

enum Block {
    None,
    Human,
    Object(usize),
}

fn set(slot: &mut Option<[f64; 3]>, v: [f64; 3], key: &str, line: usize) -> Result<()> {
    if slot.replace(v).is_some() {
        return Err(Error::parse(line, format!("duplicate `{key}` field")));
    }
    Ok(())
}

fn missing(line: usize, block: &str, key: &str) -> Error {
    Error::parse(line, format!("block `{block}` is missing `{key}`"))
}

pub fn parse_scene_text(text: &str) -> Result<SceneState> {
    let mut human: Option<HumanDraft> = None;
    let mut objects: Vec<ObjectDraft> = Vec::new();
    let mut cur = Block::None;

    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.trim().trim_matches('"').trim();
        if line.is_empty() || line.starts_with("...") || line.starts_with("<CURRENT ENVIRONMENT STATE>") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("***") {
            let name = rest
                .strip_suffix("***:")
                .ok_or_else(|| Error::parse(ln, format!("malformed block header `{line}`")))?
                .trim();
            if name.is_empty() {
                return Err(Error::parse(ln, "empty block name"));
            }
            if name == "human" {
                if human.is_some() {
                    return Err(Error::Validation("duplicate human block".into()));
                }
                human = Some(HumanDraft { line: ln, ..Default::default() });
                cur = Block::Human;
            } else {
                if objects.iter().any(|o| o.name == name) {
                    return Err(Error::Validation(format!("duplicate object name `{name}`")));
                }
                objects.push(ObjectDraft {
                    name: name.to_string(),
                    position: None,
                    orientation: None,
                    sizes: None,
                    line: ln,
                });
                cur = Block::Object(objects.len() - 1);
            }
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| Error::parse(ln, format!("expected `key: [x, y, z]`, found `{line}`")))?;
        let key = key.trim();
        let v = parse_vec(value, ln)?;
        let is_human_key = matches!(
            key,
            "pelvis position" | "left hand position" | "right hand position" | "body volume"
        );
        if matches!(cur, Block::None) {
            if !is_human_key {
                return Err(Error::parse(ln, format!("field `{key}` outside of any block")));
            }
            human = Some(HumanDraft { line: ln, ..Default::default() });
            cur = Block::Human;
        }
        match cur {
            Block::Human => {
                let h = human.as_mut().expect("human block open");
                match key {
                    "pelvis position" => set(&mut h.pelvis, v, key, ln)?,
                    "left hand position" => set(&mut h.left, v, key, ln)?,
                    "right hand position" => set(&mut h.right, v, key, ln)?,
                    "orientation" => set(&mut h.orientation, v, key, ln)?,
                    "body volume" => set(&mut h.volume, v, key, ln)?,
                    _ => return Err(Error::parse(ln, format!("unknown human field `{key}`"))),
                }
            }
            Block::Object(i) => {
                let o = &mut objects[i];
                match key {
                    "position" => set(&mut o.position, v, key, ln)?,
                    "orientation" => set(&mut o.orientation, v, key, ln)?,
                    "sizes" => set(&mut o.sizes, v, key, ln)?,
                    _ => return Err(Error::parse(ln, format!("unknown object field `{key}`"))),
                }
            }
            Block::None => unreachable!(),
        }
    }

    let h = human.ok_or_else(|| Error::parse(1, "no human block found"))?;
    let hl = h.line;
    let human = HumanState {
        pelvis: h.pelvis.ok_or_else(|| missing(hl, "human", "pelvis position"))?.into(),
        left_hand: h.left.ok_or_else(|| missing(hl, "human", "left hand position"))?.into(),
        right_hand: h.right.ok_or_else(|| missing(hl, "human", "right hand position"))?.into(),
        orientation: Orientation::from_euler(h.orientation.ok_or_else(|| missing(hl, "human", "orientation"))?),
        body_volume: h.volume.map(Vec3::from).unwrap_or(BODY_VOLUME),
    };
    let mut objs = Vec::with_capacity(objects.len());
    for o in objects {
        let position = o.position.ok_or_else(|| missing(o.line, &o.name, "position"))?;
        let orientation = o.orientation.ok_or_else(|| missing(o.line, &o.name, "orientation"))?;
        let sizes = o.sizes.ok_or_else(|| missing(o.line, &o.name, "sizes"))?;
        let bbox = OrientedBox::new(position.into(), Orientation::from_euler(orientation), sizes.into());
        objs.push(ObjectState { name: o.name, bbox });
    }
    let scene = SceneState { human, objects: objs };
    scene.validate()?;
    Ok(scene)
}
