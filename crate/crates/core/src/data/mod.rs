//! Pedestrian trajectory datasets: loading, segmentation, synthetic flows and
//! episode sampling.

pub mod episode;
pub mod io;
pub mod segment;
pub mod synthetic;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{HumanState, Point, DT};

pub use episode::{read_manifest, sample_episode, write_manifest, EpisodeSampling, EpisodeSpec, Setting};
pub use io::{load_trajectories, parse_trajectories, write_trajectories, LoadOptions};
pub use segment::{segment_episodes, Segment, SegmentParams};
pub use synthetic::{generate_synthetic, SyntheticConfig};

/// Rate of the resampled frame grid (Hz).
pub const GRID_HZ: f64 = 10.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: frames of pedestrian {ped} are not increasing")]
    NonMonotonic { line: usize, ped: u32 },
    #[error("degenerate segment: {0}")]
    Degenerate(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Axis-aligned scene box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Point,
    pub max: Point,
}

impl Bounds {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.min.x, self.max.x), p.y.clamp(self.min.y, self.max.y))
    }

    pub fn size(&self) -> Point {
        self.max - self.min
    }

    pub fn center(&self) -> Point {
        (self.min + self.max) * 0.5
    }

    /// Unit vector along the longer side.
    pub fn long_axis(&self) -> Point {
        let s = self.size();
        if s.x >= s.y {
            Point::new(1.0, 0.0)
        } else {
            Point::new(0.0, 1.0)
        }
    }

    fn around(points: impl Iterator<Item = Point>) -> Self {
        let mut b = Self::new(Point::repeat(f64::INFINITY), Point::repeat(f64::NEG_INFINITY));
        for p in points {
            b.min = b.min.inf(&p);
            b.max = b.max.sup(&p);
        }
        if b.min.x > b.max.x {
            b = Self::new(Point::zeros(), Point::zeros());
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Position on the `GRID_HZ` grid; the frame's time is `index / GRID_HZ`.
    pub index: i64,
    /// Pedestrians present, sorted by id.
    pub humans: Vec<HumanState>,
}

impl Frame {
    pub fn time(&self) -> f64 {
        self.index as f64 / GRID_HZ
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    /// Consecutive grid frames, including empty ones.
    pub frames: Vec<Frame>,
    pub frame_rate: f64,
    pub bounds: Bounds,
}

/// Lifetime summary of one pedestrian in a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Track {
    pub id: u32,
    /// Positions in `frames` of the first and last appearance.
    pub first: usize,
    pub last: usize,
    pub start: Point,
    pub end: Point,
    pub mean_speed: f64,
}

impl TrajectoryDataset {
    pub fn empty() -> Self {
        Self { frames: Vec::new(), frame_rate: GRID_HZ, bounds: Bounds::new(Point::zeros(), Point::zeros()) }
    }

    /// Builds a dense grid dataset from per-frame observations keyed by grid
    /// index; velocities must already be filled in.
    pub fn from_grid(mut by_index: BTreeMap<i64, Vec<HumanState>>, bounds: Option<Bounds>) -> Self {
        let (Some(&lo), Some(&hi)) = (by_index.keys().next(), by_index.keys().next_back()) else {
            return Self { bounds: bounds.unwrap_or(Self::empty().bounds), ..Self::empty() };
        };
        let frames: Vec<Frame> = (lo..=hi)
            .map(|index| {
                let mut humans = by_index.remove(&index).unwrap_or_default();
                humans.sort_by_key(|h| h.id);
                Frame { index, humans }
            })
            .collect();
        let bounds =
            bounds.unwrap_or_else(|| Bounds::around(frames.iter().flat_map(|f| f.humans.iter().map(|h| h.position()))));
        Self { frames, frame_rate: GRID_HZ, bounds }
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 * DT
    }

    pub fn tracks(&self) -> BTreeMap<u32, Track> {
        let mut out: BTreeMap<u32, (Track, f64, usize)> = BTreeMap::new();
        for (k, f) in self.frames.iter().enumerate() {
            for h in &f.humans {
                let e = out.entry(h.id).or_insert((
                    Track { id: h.id, first: k, last: k, start: h.position(), end: h.position(), mean_speed: 0.0 },
                    0.0,
                    0,
                ));
                e.0.last = k;
                e.0.end = h.position();
                e.1 += h.speed();
                e.2 += 1;
            }
        }
        out.into_iter()
            .map(|(id, (mut t, sum, n))| {
                t.mean_speed = sum / n as f64;
                (id, t)
            })
            .collect()
    }
}
