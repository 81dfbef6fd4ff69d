//! Four-column trajectory text files: `frame_id ped_id x y` per line.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, TrajectoryDataset, GRID_HZ};
use crate::types::{HumanState, Point};

/// Tolerance for matching a grid instant to a recorded frame (frame units).
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadOptions {
    /// Frame ids per second in the source file.
    pub frame_rate: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { frame_rate: 2.5 }
    }
}

pub fn load_trajectories(path: &Path, opts: &LoadOptions) -> Result<TrajectoryDataset, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    parse_trajectories(&text, opts)
}

struct Sample {
    frame: f64,
    pos: Point,
}

pub fn parse_trajectories(text: &str, opts: &LoadOptions) -> Result<TrajectoryDataset, DataError> {
    if !(opts.frame_rate.is_finite() && opts.frame_rate > 0.0) {
        return Err(DataError::InvalidConfig(format!("frame_rate must be positive, got {}", opts.frame_rate)));
    }
    let mut peds: BTreeMap<u32, Vec<Sample>> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = body.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(DataError::Parse { line, msg: format!("expected 4 columns, found {}", cols.len()) });
        }
        let num = |k: usize, name: &str| -> Result<f64, DataError> {
            cols[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::Parse { line, msg: format!("bad {name} value {:?}", cols[k]) })
        };
        let frame = num(0, "frame_id")?;
        let id = num(1, "ped_id")?;
        if id < 0.0 || id.fract() != 0.0 || id > u32::MAX as f64 {
            return Err(DataError::Parse { line, msg: format!("bad ped_id value {:?}", cols[1]) });
        }
        let id = id as u32;
        let pos = Point::new(num(2, "x")?, num(3, "y")?);
        let track = peds.entry(id).or_default();
        if track.last().is_some_and(|s| s.frame >= frame) {
            return Err(DataError::NonMonotonic { line, ped: id });
        }
        track.push(Sample { frame, pos });
    }

    let scale = GRID_HZ / opts.frame_rate;
    let mut by_index: BTreeMap<i64, Vec<HumanState>> = BTreeMap::new();
    for (id, samples) in peds {
        let first = samples[0].frame * scale;
        let last = samples[samples.len() - 1].frame * scale;
        let (k0, k1) = ((first - SNAP).ceil() as i64, (last + SNAP).floor() as i64);
        let mut pts = Vec::with_capacity((k1 - k0 + 1).max(0) as usize);
        let mut j = 0;
        for k in k0..=k1 {
            let u = k as f64 / scale;
            while j + 1 < samples.len() && samples[j + 1].frame <= u + SNAP {
                j += 1;
            }
            let a = &samples[j];
            let p = if (u - a.frame).abs() <= SNAP || j + 1 == samples.len() {
                a.pos
            } else {
                let b = &samples[j + 1];
                let alpha = (u - a.frame) / (b.frame - a.frame);
                a.pos + (b.pos - a.pos) * alpha
            };
            pts.push(p);
        }
        for (n, k) in (k0..=k1).enumerate() {
            let v = if n + 1 < pts.len() {
                (pts[n + 1] - pts[n]) * GRID_HZ
            } else if n > 0 {
                (pts[n] - pts[n - 1]) * GRID_HZ
            } else {
                Point::zeros()
            };
            by_index.entry(k).or_default().push(HumanState::new(id, pts[n].x, pts[n].y, v.x, v.y));
        }
    }
    Ok(TrajectoryDataset::from_grid(by_index, None))
}

/// Writes the grid dataset in the same four-column layout; read it back with
/// `frame_rate = GRID_HZ`.
pub fn write_trajectories<W: Write>(ds: &TrajectoryDataset, mut w: W) -> std::io::Result<()> {
    for f in &ds.frames {
        for h in &f.humans {
            writeln!(w, "{} {} {} {}", f.index, h.id, h.px, h.py)?;
        }
    }
    Ok(())
}
