//! Pose stream files.
//!
//! ```text
//! hoi-pose 1
//! fps 30
//! joints left_hand right_hand
//! channels bbox conf:3 full_body
//! video_height 720
//! data
//! <frame> root(3) quat(4) joints(3 each) [bbox] [conf...] [full_body 0|1]
//! ```
//! `channels` and `video_height` are optional.

use super::PoseStream;
use crate::error::{Error, Result};
use crate::scene::{Quat, Vec3};
use std::fmt::Write as _;
use std::path::Path;

const MAGIC: &str = "hoi-pose 1";

fn num(x: f64) -> String {
    let r = format!("{x:.6}");
    if r == "-0.000000" { "0.000000".into() } else { r }
}

pub fn write_stream(s: &PoseStream) -> String {
    let mut out = format!("{MAGIC}\nfps {}\njoints", s.fps);
    for j in &s.joint_names {
        out.push(' ');
        out.push_str(j);
    }
    out.push('\n');
    let mut ch = Vec::new();
    if s.bbox_area.is_some() {
        ch.push("bbox".to_string());
    }
    if let Some(c) = &s.confidence {
        ch.push(format!("conf:{}", c.first().map_or(0, |r| r.len())));
    }
    if s.full_body.is_some() {
        ch.push("full_body".to_string());
    }
    if !ch.is_empty() {
        let _ = writeln!(out, "channels {}", ch.join(" "));
    }
    if let Some(h) = s.video_height {
        let _ = writeln!(out, "video_height {h}");
    }
    out.push_str("data\n");
    for f in 0..s.len() {
        let _ = write!(out, "{f}");
        let mut vals: Vec<f64> = s.root[f].to_array().to_vec();
        vals.extend(s.orientation[f].to_array());
        for j in &s.joints[f] {
            vals.extend(j.to_array());
        }
        if let Some(a) = &s.bbox_area {
            vals.push(a[f]);
        }
        if let Some(c) = &s.confidence {
            vals.extend(&c[f]);
        }
        for v in vals {
            out.push(' ');
            out.push_str(&num(v));
        }
        if let Some(b) = &s.full_body {
            out.push_str(if b[f] { " 1" } else { " 0" });
        }
        out.push('\n');
    }
    out
}

pub fn read_stream(text: &str) -> Result<PoseStream> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    if lines.next().map(|(_, l)| l.trim()) != Some(MAGIC) {
        return Err(Error::parse(1, "missing pose stream header"));
    }
    let mut fps = None;
    let mut names: Option<Vec<String>> = None;
    let (mut bbox, mut conf, mut full) = (false, None::<usize>, false);
    let mut height = None;
    for (ln, l) in lines.by_ref() {
        let parts: Vec<&str> = l.split_whitespace().collect();
        match parts.as_slice() {
            [] => continue,
            ["data"] => break,
            ["fps", v] => fps = Some(v.parse::<f64>().map_err(|_| Error::parse(ln, "bad fps"))?),
            ["joints", rest @ ..] => names = Some(rest.iter().map(|s| s.to_string()).collect()),
            ["video_height", v] => height = Some(v.parse().map_err(|_| Error::parse(ln, "bad video height"))?),
            ["channels", rest @ ..] => {
                for c in rest {
                    match *c {
                        "bbox" => bbox = true,
                        "full_body" => full = true,
                        c if c.starts_with("conf:") => {
                            conf = Some(c[5..].parse().map_err(|_| Error::parse(ln, "bad confidence count"))?)
                        }
                        other => return Err(Error::parse(ln, format!("unknown channel `{other}`"))),
                    }
                }
            }
            _ => return Err(Error::parse(ln, format!("unexpected line `{l}`"))),
        }
    }
    let fps = fps.ok_or_else(|| Error::parse(0, "missing fps"))?;
    let names = names.ok_or_else(|| Error::parse(0, "missing joints line"))?;
    let nj = names.len();
    let width = 1 + 7 + 3 * nj + bbox as usize + conf.unwrap_or(0) + full as usize;
    let mut s = PoseStream {
        fps,
        joint_names: names,
        joints: vec![],
        root: vec![],
        orientation: vec![],
        bbox_area: bbox.then(Vec::new),
        confidence: conf.map(|_| Vec::new()),
        full_body: full.then(Vec::new),
        video_height: height,
    };
    for (ln, l) in lines {
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.is_empty() {
            continue;
        }
        if parts.len() != width {
            return Err(Error::parse(ln, format!("expected {width} columns, found {}", parts.len())));
        }
        let nums = parts.len() - 1 - full as usize;
        let x: Vec<f64> = parts[1..=nums]
            .iter()
            .map(|p| p.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad number `{p}`"))))
            .collect::<Result<_>>()?;
        s.root.push(Vec3::new(x[0], x[1], x[2]));
        s.orientation.push(Quat::new(x[3], x[4], x[5], x[6]));
        s.joints.push((0..nj).map(|j| Vec3::new(x[7 + 3 * j], x[8 + 3 * j], x[9 + 3 * j])).collect());
        let mut o = 7 + 3 * nj;
        if let Some(a) = s.bbox_area.as_mut() {
            a.push(x[o]);
            o += 1;
        }
        if let (Some(c), Some(k)) = (s.confidence.as_mut(), conf) {
            c.push(x[o..o + k].to_vec());
        }
        if let Some(b) = s.full_body.as_mut() {
            b.push(*parts.last().unwrap() == "1");
        }
    }
    s.validate()?;
    Ok(s)
}

pub fn load_stream(path: &Path) -> Result<PoseStream> {
    read_stream(&std::fs::read_to_string(path)?)
}
