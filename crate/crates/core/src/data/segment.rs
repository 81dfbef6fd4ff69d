//! Splitting a dataset into crowded stretches usable as episodes.

use serde::{Deserialize, Serialize};

use super::{Bounds, TrajectoryDataset};
use crate::types::{Point, DT};

/// Mean flow speed below which the flow direction is considered undefined.
const MIN_FLOW_SPEED: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentParams {
    pub min_peds: usize,
    /// Shortest run kept (s).
    pub min_duration: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self { min_peds: 5, min_duration: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: usize,
    /// Inclusive range of positions in the dataset's frame list.
    pub first_frame: usize,
    pub last_frame: usize,
    pub min_count: usize,
    pub max_count: usize,
    pub mean_count: f64,
    /// Unit vector of the mean pedestrian velocity, or the scene's long axis
    /// when the flow is too weak to define one.
    pub dominant_flow: Point,
    pub centroid: Point,
    pub bounds: Bounds,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.last_frame + 1 - self.first_frame
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 * DT
    }
}

/// Maximal runs of frames holding at least `min_peds` pedestrians.
pub fn segment_episodes(ds: &TrajectoryDataset, params: &SegmentParams) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut k = 0;
    let n = ds.frames.len();
    while k < n {
        if ds.frames[k].humans.len() < params.min_peds {
            k += 1;
            continue;
        }
        let start = k;
        while k < n && ds.frames[k].humans.len() >= params.min_peds {
            k += 1;
        }
        let frames = &ds.frames[start..k];
        if (frames.len() as f64) * DT + 1e-9 < params.min_duration {
            continue;
        }
        let counts: Vec<usize> = frames.iter().map(|f| f.humans.len()).collect();
        let total: usize = counts.iter().sum();
        let (mut vel, mut pos) = (Point::zeros(), Point::zeros());
        for h in frames.iter().flat_map(|f| &f.humans) {
            vel += h.velocity();
            pos += h.position();
        }
        let (vel, centroid) = if total > 0 { (vel / total as f64, pos / total as f64) } else { (vel, ds.bounds.center()) };
        let dominant_flow = if vel.norm() >= MIN_FLOW_SPEED { vel.normalize() } else { ds.bounds.long_axis() };
        out.push(Segment {
            id: out.len(),
            first_frame: start,
            last_frame: k - 1,
            min_count: *counts.iter().min().expect("non-empty run"),
            max_count: *counts.iter().max().expect("non-empty run"),
            mean_count: total as f64 / counts.len() as f64,
            dominant_flow,
            centroid,
            bounds: ds.bounds,
        });
    }
    out
}
