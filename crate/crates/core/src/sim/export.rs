//! Episode traces (JSON lines: a summary line, then one line per step) and
//! metric tables (CSV).

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::MetricTable;
use super::{EpisodeRecord, Outcome, StepRecord};
use crate::data::EpisodeSpec;
use crate::types::{Goal, RobotState};

#[derive(Serialize, Deserialize)]
struct Summary {
    spec: EpisodeSpec,
    planner: String,
    initial: RobotState,
    goal: Goal,
    outcome: Outcome,
    navigation_time: f64,
    path_length: f64,
    min_ped_distance: Option<f64>,
    frozen_steps: usize,
    freeze_steps: usize,
    steps: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("trace holds {found} steps, summary announces {expected}")]
    StepCount { expected: usize, found: usize },
    #[error("empty trace")]
    Empty,
}

pub fn write_trace<W: Write>(r: &EpisodeRecord, mut w: W) -> std::io::Result<()> {
    let summary = Summary {
        spec: r.spec,
        planner: r.planner.clone(),
        initial: r.initial,
        goal: r.goal,
        outcome: r.outcome,
        navigation_time: r.navigation_time,
        path_length: r.path_length,
        min_ped_distance: r.min_ped_distance,
        frozen_steps: r.frozen_steps,
        freeze_steps: r.freeze_steps,
        steps: r.steps.len(),
    };
    serde_json::to_writer(&mut w, &summary)?;
    writeln!(w)?;
    for s in &r.steps {
        serde_json::to_writer(&mut w, s)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn parse_trace(text: &str) -> Result<EpisodeRecord, TraceError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(TraceError::Empty)?;
    let s: Summary = serde_json::from_str(first).map_err(|source| TraceError::Json { line: 1, source })?;
    let steps = lines
        .map(|(i, l)| serde_json::from_str::<StepRecord>(l).map_err(|source| TraceError::Json { line: i + 1, source }))
        .collect::<Result<Vec<_>, _>>()?;
    if steps.len() != s.steps {
        return Err(TraceError::StepCount { expected: s.steps, found: steps.len() });
    }
    Ok(EpisodeRecord {
        spec: s.spec,
        planner: s.planner,
        initial: s.initial,
        goal: s.goal,
        steps,
        outcome: s.outcome,
        navigation_time: s.navigation_time,
        path_length: s.path_length,
        min_ped_distance: s.min_ped_distance,
        frozen_steps: s.frozen_steps,
        freeze_steps: s.freeze_steps,
    })
}

/// Marker written for undefined averages.
pub const UNDEFINED: &str = "NA";

pub fn write_metrics_csv<W: Write>(rows: &[(&str, &MetricTable)], mut w: W) -> std::io::Result<()> {
    let opt = |x: Option<f64>| x.map_or_else(|| UNDEFINED.to_string(), |v| v.to_string());
    writeln!(w, "method,SR,CR,TR,NT,PL,MP,FF,episodes")?;
    for (name, m) in rows {
        writeln!(w, "{name},{},{},{},{},{},{},{},{}", m.sr, m.cr, m.tr, opt(m.nt), opt(m.pl), opt(m.mp), m.ff, m.episodes)?;
    }
    Ok(())
}
