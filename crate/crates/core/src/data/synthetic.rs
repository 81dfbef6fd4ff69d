//! Two opposing pedestrian flows in a straight corridor.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Bounds, DataError, TrajectoryDataset, GRID_HZ};
use crate::types::{HumanState, Point};

/// Corridor along x centered on the origin. The +x flow walks at
/// `y = -lane_offset`, the -x flow at `y = +lane_offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub group_size_min: usize,
    pub group_size_max: usize,
    /// m/s
    pub mean_speed: f64,
    /// Half-width of the uniform speed noise (m/s).
    pub speed_noise: f64,
    /// Bounds of the uniform gap between consecutive spawns (s).
    pub spawn_interval_min: f64,
    pub spawn_interval_max: f64,
    pub corridor_length: f64,
    pub corridor_width: f64,
    pub lane_offset: f64,
    /// Members sit within this lateral distance of the lane center (m).
    pub lateral_spread: f64,
    /// Longitudinal distance between consecutive members at spawn (m).
    pub member_spacing: f64,
    /// Recorded time span (s).
    pub duration: f64,
    /// Simulated time before recording starts, so the corridor is already
    /// populated at t = 0 (s).
    pub warmup: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            group_size_min: 2,
            group_size_max: 5,
            mean_speed: 0.9,
            speed_noise: 0.05,
            spawn_interval_min: 4.0,
            spawn_interval_max: 6.0,
            corridor_length: 24.0,
            corridor_width: 10.0,
            lane_offset: 1.5,
            lateral_spread: 0.6,
            member_spacing: 0.7,
            duration: 300.0,
            warmup: 30.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidConfig(m.to_string()));
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if self.group_size_min < 1 || self.group_size_min > self.group_size_max {
            return bad("group sizes must satisfy 1 <= min <= max");
        }
        if !pos(self.mean_speed) || !(0.0..self.mean_speed).contains(&self.speed_noise) {
            return bad("speeds must stay positive: 0 <= speed_noise < mean_speed");
        }
        if !pos(self.spawn_interval_min) || self.spawn_interval_min > self.spawn_interval_max {
            return bad("spawn interval must satisfy 0 < min <= max");
        }
        if !pos(self.corridor_length) || !pos(self.corridor_width) || !pos(self.duration) {
            return bad("corridor size and duration must be positive");
        }
        let lane_ok = self.lane_offset >= 0.0 && self.lateral_spread >= 0.0;
        if !lane_ok || self.lane_offset + self.lateral_spread > self.corridor_width / 2.0 {
            return bad("lanes must fit inside the corridor");
        }
        if !(self.member_spacing >= 0.0 && self.warmup >= 0.0 && self.spawn_interval_max.is_finite()) {
            return bad("member_spacing and warmup must be non-negative");
        }
        Ok(())
    }

    pub fn bounds(&self) -> Bounds {
        let h = Point::new(self.corridor_length / 2.0, self.corridor_width / 2.0);
        Bounds::new(-h, h)
    }
}

/// Pedestrian ids of each spawned group, in spawn order.
pub type GroupRoster = Vec<Vec<u32>>;

struct Walker {
    id: u32,
    /// Position at t = 0.
    origin: Point,
    velocity: Point,
}

pub fn generate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<TrajectoryDataset, DataError> {
    generate_synthetic_with_groups(cfg, seed).map(|(ds, _)| ds)
}

pub fn generate_synthetic_with_groups(
    cfg: &SyntheticConfig,
    seed: u64,
) -> Result<(TrajectoryDataset, GroupRoster), DataError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half_len = cfg.corridor_length / 2.0;
    let mut walkers = Vec::new();
    let mut roster = Vec::new();
    let mut next_id = 0u32;
    let mut forward = rng.gen_bool(0.5);
    let mut t = -cfg.warmup + rng.gen_range(0.0..=cfg.spawn_interval_max);
    while t < cfg.duration {
        let dir = if forward { 1.0 } else { -1.0 };
        let lane = -dir * cfg.lane_offset;
        let size = rng.gen_range(cfg.group_size_min..=cfg.group_size_max);
        let mut speeds: Vec<f64> =
            (0..size).map(|_| cfg.mean_speed + rng.gen_range(-cfg.speed_noise..=cfg.speed_noise)).collect();
        // leaders are the fastest so trailing members never walk into them
        speeds.sort_by(|a, b| b.total_cmp(a));
        let mut ids = Vec::with_capacity(size);
        for (j, speed) in speeds.into_iter().enumerate() {
            let lateral = if cfg.lateral_spread > 0.0 {
                rng.gen_range(-cfg.lateral_spread..=cfg.lateral_spread)
            } else {
                0.0
            };
            let entry = Point::new(-dir * (half_len + j as f64 * cfg.member_spacing), lane + lateral);
            let velocity = Point::new(dir * speed, 0.0);
            walkers.push(Walker { id: next_id, origin: entry - velocity * t, velocity });
            ids.push(next_id);
            next_id += 1;
        }
        roster.push(ids);
        forward = !forward;
        t += if cfg.spawn_interval_min < cfg.spawn_interval_max {
            rng.gen_range(cfg.spawn_interval_min..=cfg.spawn_interval_max)
        } else {
            cfg.spawn_interval_min
        };
    }

    let n_frames = (cfg.duration * GRID_HZ).round() as i64;
    let mut by_index: BTreeMap<i64, Vec<HumanState>> = (0..n_frames).map(|k| (k, Vec::new())).collect();
    for w in &walkers {
        for (&k, humans) in by_index.iter_mut() {
            let p = w.origin + w.velocity * (k as f64 / GRID_HZ);
            if p.x.abs() <= half_len {
                humans.push(HumanState::new(w.id, p.x, p.y, w.velocity.x, w.velocity.y));
            }
        }
    }
    roster.retain(|g| g.iter().any(|id| by_index.values().any(|hs| hs.iter().any(|h| h.id == *id))));
    Ok((TrajectoryDataset::from_grid(by_index, Some(cfg.bounds())), roster))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> SyntheticConfig {
        SyntheticConfig { duration: 60.0, ..Default::default() }
    }

    #[test]
    fn seeded_bit_exact() {
        let a = generate_synthetic(&short(), 4).unwrap();
        let b = generate_synthetic(&short(), 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic(&short(), 5).unwrap());
        assert_eq!(a.frames.len(), 600);
    }

    #[test]
    fn speeds_and_group_sizes_in_range() {
        let (ds, groups) = generate_synthetic_with_groups(&short(), 9).unwrap();
        for h in ds.frames.iter().flat_map(|f| &f.humans) {
            assert!((0.85..=0.95).contains(&h.speed()), "{}", h.speed());
            assert_eq!(h.vy, 0.0);
            assert!(ds.bounds.contains(h.position()));
        }
        assert!(!groups.is_empty());
        for g in &groups {
            assert!((2..=5).contains(&g.len()));
        }
    }

    #[test]
    fn corridor_is_populated_and_flows_oppose() {
        let ds = generate_synthetic(&short(), 1).unwrap();
        let counts: Vec<usize> = ds.frames.iter().map(|f| f.humans.len()).collect();
        assert!(counts.iter().all(|&c| c >= 5), "{:?}", counts.iter().min());
        let f = &ds.frames[300];
        assert!(f.humans.iter().any(|h| h.vx > 0.0) && f.humans.iter().any(|h| h.vx < 0.0));
        for h in &f.humans {
            // each flow keeps to its own lane
            assert!(h.vx * h.py < 0.0);
        }
    }

    #[test]
    fn members_never_overlap_within_a_lane() {
        let ds = generate_synthetic(&short(), 2).unwrap();
        for f in &ds.frames {
            for (i, a) in f.humans.iter().enumerate() {
                for b in &f.humans[i + 1..] {
                    assert!((a.position() - b.position()).norm() > 0.5 || a.vx * b.vx < 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        let bad = SyntheticConfig { group_size_min: 0, ..Default::default() };
        assert!(generate_synthetic(&bad, 0).is_err());
        let bad = SyntheticConfig { speed_noise: 1.0, ..Default::default() };
        assert!(generate_synthetic(&bad, 0).is_err());
    }
}
