//! Aggregate navigation metrics and batch evaluation.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::engine::run_episode;
use super::planners::Planner;
use super::{EpisodeRecord, Outcome, SimError, SimParams};
use crate::data::{EpisodeSpec, TrajectoryDataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub episodes: usize,
    pub sr: f64,
    pub cr: f64,
    pub tr: f64,
    /// Mean navigation time of successful episodes; undefined without any.
    pub nt: Option<f64>,
    /// Mean path length of episodes without collision.
    pub pl: Option<f64>,
    /// Mean of per-episode minimum pedestrian distances.
    pub mp: Option<f64>,
    pub ff: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Frozen and eligible step counts under threshold `freeze_eps`.
pub fn freeze_counts(r: &EpisodeRecord, freeze_eps: f64) -> (usize, usize) {
    let mut eligible = r.steps.len();
    if r.outcome == Outcome::Success && r.steps.last().is_some_and(|s| s.control.v < freeze_eps) {
        eligible -= 1;
    }
    let frozen = r.steps[..eligible].iter().filter(|s| s.control.v < freeze_eps).count();
    (frozen, eligible)
}

pub fn compute_metrics(records: &[EpisodeRecord], freeze_eps: f64) -> Result<MetricTable, SimError> {
    if records.is_empty() {
        return Err(SimError::NoEpisodes);
    }
    let n = records.len() as f64;
    let count = |o: Outcome| records.iter().filter(|r| r.outcome == o).count() as f64;
    let sr = count(Outcome::Success) / n;
    let cr = count(Outcome::Collision) / n;
    // complement keeps SR + CR + TR == 1 exactly in floating point
    let tr = 1.0 - (sr + cr);
    let (frozen, eligible) = records
        .iter()
        .map(|r| freeze_counts(r, freeze_eps))
        .fold((0, 0), |(f, e), (a, b)| (f + a, e + b));
    Ok(MetricTable {
        episodes: records.len(),
        sr,
        cr,
        tr,
        nt: mean(records.iter().filter(|r| r.outcome == Outcome::Success).map(|r| r.navigation_time)),
        pl: mean(records.iter().filter(|r| r.outcome != Outcome::Collision).map(|r| r.path_length)),
        mp: mean(records.iter().filter_map(|r| r.min_ped_distance)),
        ff: if eligible > 0 { frozen as f64 / eligible as f64 } else { 0.0 },
    })
}

#[derive(Debug)]
pub struct Evaluation {
    /// Metrics over the episodes that ran to completion; `None` if none did.
    pub table: Option<MetricTable>,
    /// Per-episode results in spec order.
    pub results: Vec<Result<EpisodeRecord, SimError>>,
}

impl Evaluation {
    pub fn records(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.results.iter().filter_map(|r| r.as_ref().ok())
    }
}

/// Runs every spec with a fresh planner per worker thread. Results are in
/// spec order whatever the number of jobs.
pub fn evaluate(
    make_planner: &(dyn Fn() -> Box<dyn Planner> + Sync),
    specs: &[EpisodeSpec],
    ds: Arc<TrajectoryDataset>,
    params: &SimParams,
    jobs: usize,
) -> Evaluation {
    let slots: Mutex<Vec<Option<Result<EpisodeRecord, SimError>>>> =
        Mutex::new((0..specs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, specs.len().max(1)) {
            scope.spawn(|| {
                let mut planner = make_planner();
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(spec) = specs.get(i) else { break };
                    let r = run_episode(spec, ds.clone(), params, planner.as_mut());
                    slots.lock().expect("no poisoned workers")[i] = Some(r);
                }
            });
        }
    });
    let results: Vec<_> = slots.into_inner().expect("workers joined").into_iter().map(|r| r.expect("filled")).collect();
    let ok: Vec<EpisodeRecord> = results.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    Evaluation { table: compute_metrics(&ok, params.freeze_eps).ok(), results }
}
