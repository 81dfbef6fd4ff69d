//! High-level follow-point policy: observation encoding, SAC learner,
//! replay, checkpoints and the training loop.

pub mod checkpoint;
pub mod nn;
pub mod obs;
pub mod replay;
pub mod sac;
pub mod train;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::types::Point;
pub use checkpoint::{load_policy, save_policy, CheckpointError};
pub use obs::{encode_observation, HumanSlot, ObsConfig, Observation};
pub use replay::{ReplayBuffer, ReplayError, Transition};
pub use sac::{Actor, SacAgent, SacConfig, SacError, SacLosses};
pub use train::{train, CurvePoint, MacroEnv, MacroStep, TrainError, TrainOutcome};

/// Target point in the robot frame (m).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FollowPoint {
    pub fx: f64,
    pub fy: f64,
}

impl FollowPoint {
    pub fn new(fx: f64, fy: f64) -> Self {
        Self { fx, fy }
    }

    pub fn as_point(&self) -> Point {
        Point::new(self.fx, self.fy)
    }

    pub fn clamped(self, f_max: f64) -> Self {
        Self {
            fx: self.fx.clamp(-f_max, f_max),
            fy: self.fy.clamp(-f_max, f_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Stochastic,
    Deterministic,
}

/// Inference-only policy: the trained actor plus its encoding constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub actor: Actor<f32>,
    pub obs: ObsConfig,
    pub f_max: f64,
}

impl Policy {
    pub fn from_agent(agent: &SacAgent<f32>, obs: ObsConfig) -> Self {
        Self { actor: agent.actor.clone(), obs, f_max: agent.cfg.f_max }
    }

    pub fn act<R: Rng>(&self, obs: &Observation, mode: ActMode, rng: &mut R) -> FollowPoint {
        let f = obs.features(&self.obs);
        let x = Array2::from_shape_fn((1, f.len()), |(_, j)| f[j] as f32);
        let a = match mode {
            ActMode::Deterministic => self.actor.deterministic(x.view()),
            ActMode::Stochastic => {
                let noise = Array2::from_shape_fn((1, sac::ACTION_DIM), |_| {
                    rng.sample::<f64, _>(rand_distr::StandardNormal) as f32
                });
                self.actor.sample(x.view(), noise.view()).0
            }
        };
        FollowPoint::new(a[[0, 0]] as f64 * self.f_max, a[[0, 1]] as f64 * self.f_max).clamped(self.f_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Goal, HumanState, RobotState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn policy(seed: u64) -> Policy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = SacConfig { hidden: vec![32, 32], ..Default::default() };
        let obs = ObsConfig::default();
        let agent = SacAgent::<f32>::new(obs.dim(), cfg, &mut rng);
        Policy::from_agent(&agent, obs)
    }

    fn random_obs(rng: &mut ChaCha8Rng) -> Observation {
        let r = RobotState {
            v_last: rng.gen_range(0.0..1.0),
            ..RobotState::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-3.0..3.0))
        };
        let hs: Vec<HumanState> = (0..rng.gen_range(0..15))
            .map(|i| {
                HumanState::new(
                    i,
                    r.x + rng.gen_range(-6.0..6.0),
                    r.y + rng.gen_range(-6.0..6.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                )
            })
            .collect();
        let g = Goal::new(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0));
        encode_observation(&r, &g, &hs, &ObsConfig::default())
    }

    #[test]
    fn deterministic_repeatable() {
        let p = policy(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let o = random_obs(&mut rng);
        let a = p.act(&o, ActMode::Deterministic, &mut rng);
        let b = p.act(&o, ActMode::Deterministic, &mut rng);
        assert_eq!(a, b);
    }

    #[test]
    fn stochastic_reproducible_under_seed() {
        let p = policy(1);
        let o = random_obs(&mut ChaCha8Rng::seed_from_u64(3));
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| p.act(&o, ActMode::Stochastic, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn actions_within_box() {
        let p = policy(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..100_000 {
            let o = random_obs(&mut rng);
            let mode = if k % 2 == 0 { ActMode::Stochastic } else { ActMode::Deterministic };
            let f = p.act(&o, mode, &mut rng);
            assert!(f.fx.abs() <= 5.0 && f.fy.abs() <= 5.0);
        }
    }
}
