//! Flow-group clustering of pedestrians.
//!
//! DBSCAN over a conjunctive neighbourhood: two pedestrians are neighbours when
//! they are close in position, heading and speed at the same time. Every
//! pedestrian ends up in exactly one group; points DBSCAN would call noise
//! become singleton groups.

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_6, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::wrap_angle;
use crate::types::{HumanState, Point};

/// Speed below which a pedestrian's heading is treated as undefined.
pub const STATIONARY_SPEED: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupingError {
    #[error("duplicate pedestrian id {0} in one frame")]
    DuplicateId(u32),
    #[error("invalid grouping parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroupingParams {
    pub eps_p: f64,
    pub eps_theta: f64,
    pub eps_v: f64,
    pub min_points: usize,
}

impl Default for GroupingParams {
    fn default() -> Self {
        Self {
            eps_p: 2.0,
            eps_theta: FRAC_PI_6,
            eps_v: 1.0,
            min_points: 1,
        }
    }
}

impl GroupingParams {
    pub fn validate(&self) -> Result<(), GroupingError> {
        if !(self.eps_p > 0.0 && self.eps_theta > 0.0 && self.eps_v > 0.0) {
            return Err(GroupingError::InvalidParams("all thresholds must be positive"));
        }
        if self.min_points == 0 {
            return Err(GroupingError::InvalidParams("min_points must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    /// Member ids in ascending order.
    pub member_ids: Vec<u32>,
    pub member_positions: Vec<Point>,
    pub mean_speed: f64,
    pub mean_heading: f64,
}

impl Group {
    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }

    /// Distance from `p` to the nearest member.
    pub fn distance_to(&self, p: &Point) -> f64 {
        self.member_positions
            .iter()
            .map(|m| (m - p).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupSet {
    /// Group index of each input pedestrian, in input order.
    pub labels: Vec<usize>,
    pub groups: Vec<Group>,
}

impl GroupSet {
    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

#[derive(Clone, Copy)]
struct Kin {
    pos: Point,
    speed: f64,
    heading: f64,
    stationary: bool,
}

impl From<&HumanState> for Kin {
    fn from(h: &HumanState) -> Self {
        let speed = h.speed();
        let stationary = speed < STATIONARY_SPEED;
        Kin {
            pos: h.position(),
            speed,
            heading: if stationary { 0.0 } else { h.vy.atan2(h.vx) },
            stationary,
        }
    }
}

fn neighbours(a: &Kin, b: &Kin, p: &GroupingParams) -> bool {
    if (a.pos - b.pos).norm() > p.eps_p {
        return false;
    }
    match (a.stationary, b.stationary) {
        (true, true) => true,
        (false, false) => {
            wrap_angle(a.heading - b.heading).abs() <= p.eps_theta
                && (a.speed - b.speed).abs() <= p.eps_v
        }
        _ => false,
    }
}

/// Whether two pedestrians are direct neighbours under `params`.
pub fn are_neighbours(a: &HumanState, b: &HumanState, params: &GroupingParams) -> bool {
    neighbours(&Kin::from(a), &Kin::from(b), params)
}

/// Clusters pedestrians into flow groups.
pub fn cluster_groups(humans: &[HumanState], params: &GroupingParams) -> Result<GroupSet, GroupingError> {
    params.validate()?;
    let mut seen = HashSet::with_capacity(humans.len());
    for h in humans {
        if !seen.insert(h.id) {
            return Err(GroupingError::DuplicateId(h.id));
        }
    }
    let n = humans.len();
    if n == 0 {
        return Ok(GroupSet::default());
    }

    let kin: Vec<Kin> = humans.iter().map(Kin::from).collect();
    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| neighbours(&kin[i], &kin[j], params)).collect())
        .collect();
    // neighbourhoods include the point itself
    let core: Vec<bool> = adjacency.iter().map(|a| a.len() >= params.min_points).collect();

    const UNASSIGNED: usize = usize::MAX;
    let mut cluster = vec![UNASSIGNED; n];
    let mut next = 0usize;
    for seed in 0..n {
        if cluster[seed] != UNASSIGNED || !core[seed] {
            continue;
        }
        cluster[seed] = next;
        let mut stack = vec![seed];
        while let Some(i) = stack.pop() {
            for &j in &adjacency[i] {
                if cluster[j] == UNASSIGNED {
                    cluster[j] = next;
                    if core[j] {
                        stack.push(j);
                    }
                }
            }
        }
        next += 1;
    }
    for c in cluster.iter_mut().filter(|c| **c == UNASSIGNED) {
        *c = next;
        next += 1;
    }

    // renumber by ascending smallest member id
    let mut min_id = vec![u32::MAX; next];
    for (i, &c) in cluster.iter().enumerate() {
        min_id[c] = min_id[c].min(humans[i].id);
    }
    let mut order: Vec<usize> = (0..next).collect();
    order.sort_by_key(|&c| min_id[c]);
    let mut remap = vec![0usize; next];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    let labels: Vec<usize> = cluster.iter().map(|&c| remap[c]).collect();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); next];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let groups = members
        .into_iter()
        .map(|mut idx| {
            idx.sort_by_key(|&i| humans[i].id);
            summarize(&idx, humans, &kin)
        })
        .collect();

    Ok(GroupSet { labels, groups })
}

fn summarize(idx: &[usize], humans: &[HumanState], kin: &[Kin]) -> Group {
    let count = idx.len() as f64;
    let all_stationary = idx.iter().all(|&i| kin[i].stationary);
    let (mean_speed, mean_heading) = if all_stationary {
        (0.0, 0.0)
    } else {
        let speed = idx.iter().map(|&i| kin[i].speed).sum::<f64>() / count;
        let (s, c) = idx
            .iter()
            .fold((0.0, 0.0), |(s, c), &i| (s + kin[i].heading.sin(), c + kin[i].heading.cos()));
        let heading = if s.abs() < 1e-12 && c.abs() < 1e-12 { 0.0 } else { s.atan2(c) };
        (speed, if heading == -PI { PI } else { heading })
    };
    Group {
        member_ids: idx.iter().map(|&i| humans[i].id).collect(),
        member_positions: idx.iter().map(|&i| kin[i].pos).collect(),
        mean_speed,
        mean_heading,
    }
}
