//! Plain-text clip files.
//!
//! ```text
//! hoi-clip 1
//! backend kinematic
//! fps 30
//! frames 61
//! object box 0.3 0.3 0.3
//! grasp box 20 1 1 0.15 0.02 0.0 0.15 -0.02 0.0
//! control pelvis 0 0 0 0.9 ; 60 3 0 0.9
//! data
//! <frame> pelvis(3) lhand(3) rhand(3) lfoot(3) rfoot(3) quat(4) [obj pos(3) quat(4)]...
//! ```
//! Object columns follow the `object` lines in order.

use super::{FramePose, GraspEvent, MotionClip};
use crate::error::{Error, Result};
use crate::scene::{Quat, Vec3};
use crate::traj::{ControlTrack, DenseTrack, Waypoint};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

const MAGIC: &str = "hoi-clip 1";

fn num(x: f64) -> String {
    let r = format!("{x:.6}");
    if r == "-0.000000" { "0.000000".into() } else { r }
}

fn push_vec(s: &mut String, v: Vec3) {
    for c in v.to_array() {
        s.push(' ');
        s.push_str(&num(c));
    }
}

fn push_quat(s: &mut String, q: Quat) {
    for c in q.to_array() {
        s.push(' ');
        s.push_str(&num(c));
    }
}

pub fn write_clip(clip: &MotionClip) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "backend {}", clip.backend);
    let _ = writeln!(s, "fps {}", clip.fps);
    let _ = writeln!(s, "frames {}", clip.frames.len());
    for (name, size) in &clip.object_sizes {
        let _ = write!(s, "object {name}");
        push_vec(&mut s, *size);
        s.push('\n');
    }
    for g in &clip.grasp_events {
        let _ = write!(s, "grasp {} {} {} {}", g.object, g.frame, g.hands.0 as u8, g.hands.1 as u8);
        push_vec(&mut s, g.contact_local.0);
        push_vec(&mut s, g.contact_local.1);
        s.push('\n');
    }
    for t in &clip.controls {
        let rows: Vec<String> = t
            .waypoints
            .iter()
            .map(|w| format!("{} {} {} {}", w.frame, num(w.position.x), num(w.position.y), num(w.position.z)))
            .collect();
        let _ = writeln!(s, "control {} {}", t.name, rows.join(" ; "));
    }
    s.push_str("data\n");
    for (f, p) in clip.frames.iter().enumerate() {
        let _ = write!(s, "{f}");
        for v in [p.pelvis, p.left_hand, p.right_hand, p.left_foot, p.right_foot] {
            push_vec(&mut s, v);
        }
        push_quat(&mut s, p.orientation);
        for t in clip.object_tracks.values() {
            push_vec(&mut s, t.positions[f]);
            push_quat(&mut s, t.orientations[f]);
        }
        s.push('\n');
    }
    s
}

fn floats(line: usize, parts: &[&str]) -> Result<Vec<f64>> {
    parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| Error::parse(line, format!("bad number `{p}`"))))
        .collect()
}

fn v3(x: &[f64]) -> Vec3 {
    Vec3::new(x[0], x[1], x[2])
}

pub fn read_clip(text: &str) -> Result<MotionClip> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(Error::parse(1, "missing clip header")),
    }
    let mut backend = String::new();
    let mut fps = None;
    let mut count = None;
    let mut sizes = BTreeMap::new();
    let mut grasps = Vec::new();
    let mut controls = Vec::new();
    for (ln, l) in lines.by_ref() {
        let parts: Vec<&str> = l.split_whitespace().collect();
        match parts.as_slice() {
            [] => continue,
            ["data"] => break,
            ["backend", b] => backend = b.to_string(),
            ["fps", v] => fps = Some(floats(ln, &[v])?[0]),
            ["frames", v] => count = Some(v.parse::<usize>().map_err(|_| Error::parse(ln, "bad frame count"))?),
            ["object", name, rest @ ..] if rest.len() == 3 => {
                sizes.insert(name.to_string(), v3(&floats(ln, rest)?));
            }
            ["grasp", name, frame, l, r, rest @ ..] if rest.len() == 6 => {
                let c = floats(ln, rest)?;
                grasps.push(GraspEvent {
                    object: name.to_string(),
                    frame: frame.parse().map_err(|_| Error::parse(ln, "bad grasp frame"))?,
                    hands: (*l == "1", *r == "1"),
                    contact_local: (v3(&c[..3]), v3(&c[3..])),
                });
            }
            ["control", name, ..] => {
                let body = l.trim_start()["control".len()..].trim_start()[name.len()..].trim();
                let mut wps = Vec::new();
                for row in body.split(';') {
                    let f: Vec<&str> = row.split_whitespace().collect();
                    if f.len() != 4 {
                        return Err(Error::parse(ln, "control rows need frame x y z"));
                    }
                    let frame = f[0].parse().map_err(|_| Error::parse(ln, "bad control frame"))?;
                    wps.push(Waypoint::new(frame, v3(&floats(ln, &f[1..])?)));
                }
                controls.push(ControlTrack::new(*name, wps));
            }
            _ => return Err(Error::parse(ln, format!("unexpected line `{l}`"))),
        }
    }
    let fps = fps.ok_or_else(|| Error::parse(0, "missing fps"))?;
    let count = count.ok_or_else(|| Error::parse(0, "missing frame count"))?;
    let width = 1 + 19 + 7 * sizes.len();
    let mut frames = Vec::with_capacity(count);
    let mut objects: BTreeMap<String, DenseTrack> = sizes
        .keys()
        .map(|k| (k.clone(), DenseTrack { start_frame: 0, positions: vec![], orientations: vec![] }))
        .collect();
    for (ln, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != width {
            return Err(Error::parse(ln, format!("expected {width} columns, found {}", parts.len())));
        }
        if parts[0] != frames.len().to_string() {
            return Err(Error::parse(ln, "frame numbers must run 0, 1, 2, ..."));
        }
        let x = floats(ln, &parts[1..])?;
        let q = |o: usize| Quat::new(x[o], x[o + 1], x[o + 2], x[o + 3]);
        frames.push(FramePose {
            pelvis: v3(&x[0..]),
            left_hand: v3(&x[3..]),
            right_hand: v3(&x[6..]),
            left_foot: v3(&x[9..]),
            right_foot: v3(&x[12..]),
            orientation: q(15),
        });
        for (k, t) in objects.values_mut().enumerate() {
            let o = 19 + 7 * k;
            t.positions.push(v3(&x[o..]));
            t.orientations.push(q(o + 3));
        }
    }
    if frames.len() != count {
        return Err(Error::parse(0, format!("header says {count} frames, data has {}", frames.len())));
    }
    Ok(MotionClip { fps, backend, frames, object_tracks: objects, object_sizes: sizes, grasp_events: grasps, controls })
}

pub fn load_clip(path: &Path) -> Result<MotionClip> {
    read_clip(&std::fs::read_to_string(path)?)
}
