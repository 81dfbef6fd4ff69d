//! Off-policy training loop over macro-steps.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::obs::{ObsConfig, Observation};
use super::replay::{ReplayBuffer, Transition};
use super::sac::{SacAgent, SacConfig, SacError};
use super::{FollowPoint, Policy};

/// Environment seen by the learner: one `step` is one follow point held for a
/// whole macro-step of low-level control.
pub trait MacroEnv {
    type Error: std::error::Error + Send + Sync + 'static;

    fn obs_config(&self) -> ObsConfig;
    /// Starts the next training episode.
    fn reset(&mut self) -> Result<Observation, Self::Error>;
    fn step(&mut self, action: FollowPoint) -> Result<MacroStep, Self::Error>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroStep {
    pub obs: Observation,
    /// Undiscounted sum of the low-level rewards.
    pub reward: f64,
    /// Same sum restricted to the goal and progress terms.
    pub task_reward: f64,
    /// Terminal state reached (success or collision); no bootstrapping.
    pub terminal: bool,
    /// Episode ended, either terminally or by the time limit.
    pub episode_over: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub transitions: usize,
    pub avg_return: f64,
    pub avg_task_return: f64,
    pub episodes: usize,
}

#[derive(Debug, Error)]
pub enum TrainError<E: std::error::Error + 'static> {
    #[error("environment: {0}")]
    Env(#[source] E),
    #[error(transparent)]
    Sac(#[from] SacError),
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: SacAgent<f32>,
    pub policy: Policy,
    pub curve: Vec<CurvePoint>,
    pub episodes: usize,
    pub updates: usize,
    /// Updates dropped because a loss was non-finite.
    pub skipped_updates: usize,
}

/// Runs SAC for `cfg.total_transitions` macro-steps. Everything random is
/// drawn from streams derived from `seed`.
pub fn train<E: MacroEnv>(
    env: &mut E,
    cfg: &SacConfig,
    seed: u64,
    mut on_curve: impl FnMut(&CurvePoint),
) -> Result<TrainOutcome, TrainError<E::Error>> {
    cfg.validate()?;
    let obs_cfg = env.obs_config();
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut act_rng = ChaCha8Rng::seed_from_u64(seed);
    act_rng.set_stream(1);
    let mut update_rng = ChaCha8Rng::seed_from_u64(seed);
    update_rng.set_stream(2);

    let mut agent = SacAgent::<f32>::new(obs_cfg.dim(), cfg.clone(), &mut init_rng);
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let mut curve = Vec::new();
    let mut recent: VecDeque<(f64, f64)> = VecDeque::with_capacity(cfg.curve_window);
    let (mut episodes, mut updates, mut skipped) = (0usize, 0usize, 0usize);

    if cfg.total_transitions > 0 {
        let mut obs = env.reset().map_err(TrainError::Env)?.features(&obs_cfg);
        let (mut ep_ret, mut ep_task) = (0.0, 0.0);
        for t in 0..cfg.total_transitions {
            let action = if t < cfg.warmup {
                FollowPoint::new(
                    act_rng.gen_range(-cfg.f_max..=cfg.f_max),
                    act_rng.gen_range(-cfg.f_max..=cfg.f_max),
                )
            } else {
                let a = agent.act_normalized(&obs, true, &mut act_rng);
                FollowPoint::new(a[0] * cfg.f_max, a[1] * cfg.f_max).clamped(cfg.f_max)
            };
            let step = env.step(action).map_err(TrainError::Env)?;
            let next = step.obs.features(&obs_cfg);
            ep_ret += step.reward;
            ep_task += step.task_reward;
            buffer.push(Transition {
                obs: std::mem::take(&mut obs),
                action,
                reward: step.reward,
                next_obs: next.clone(),
                done: step.terminal,
            });
            obs = if step.episode_over {
                episodes += 1;
                if recent.len() == cfg.curve_window {
                    recent.pop_front();
                }
                recent.push_back((ep_ret, ep_task));
                ep_ret = 0.0;
                ep_task = 0.0;
                env.reset().map_err(TrainError::Env)?.features(&obs_cfg)
            } else {
                next
            };

            if t + 1 >= cfg.warmup && buffer.len() >= cfg.batch {
                let batch = buffer.sample(cfg.batch, &mut update_rng).expect("buffer holds a batch");
                match agent.update(&batch, &mut update_rng) {
                    Ok(_) => updates += 1,
                    Err(SacError::NonFiniteLoss { .. }) => skipped += 1,
                    Err(e) => return Err(e.into()),
                }
            }

            if (t + 1) % cfg.curve_interval == 0 {
                let n = recent.len().max(1) as f64;
                let point = CurvePoint {
                    transitions: t + 1,
                    avg_return: recent.iter().map(|r| r.0).sum::<f64>() / n,
                    avg_task_return: recent.iter().map(|r| r.1).sum::<f64>() / n,
                    episodes,
                };
                on_curve(&point);
                curve.push(point);
            }
        }
    }

    let policy = Policy::from_agent(&agent, obs_cfg);
    Ok(TrainOutcome { agent, policy, curve, episodes, updates, skipped_updates: skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::obs::encode_observation;
    use crate::types::{Goal, RobotState};

    /// Point robot on a line that must reach x = 3; the follow point's x
    /// coordinate is the displacement per macro-step (clipped to 1).
    struct LineEnv {
        x: f64,
        steps: usize,
    }

    #[derive(Debug, thiserror::Error)]
    #[error("never")]
    struct Never;

    impl MacroEnv for LineEnv {
        type Error = Never;
        fn obs_config(&self) -> ObsConfig {
            ObsConfig { n_max: 1, ..Default::default() }
        }
        fn reset(&mut self) -> Result<Observation, Never> {
            self.x = 0.0;
            self.steps = 0;
            Ok(self.observe())
        }
        fn step(&mut self, a: FollowPoint) -> Result<MacroStep, Never> {
            let dx = a.fx.clamp(-1.0, 1.0);
            let before = (3.0 - self.x).abs();
            self.x += dx;
            self.steps += 1;
            let after = (3.0 - self.x).abs();
            let success = after < 0.5;
            let r = before - after + if success { 10.0 } else { 0.0 };
            Ok(MacroStep {
                obs: self.observe(),
                reward: r,
                task_reward: r,
                terminal: success,
                episode_over: success || self.steps >= 20,
            })
        }
    }

    impl LineEnv {
        fn observe(&self) -> Observation {
            encode_observation(&RobotState::new(self.x, 0.0, 0.0), &Goal::new(3.0, 0.0), &[], &self.obs_config())
        }
    }

    fn small_cfg(total: usize) -> SacConfig {
        SacConfig {
            hidden: vec![16, 16],
            batch: 16,
            warmup: 50,
            total_transitions: total,
            curve_interval: 50,
            ..Default::default()
        }
    }

    #[test]
    fn zero_transitions_returns_initial_policy() {
        let mut env = LineEnv { x: 0.0, steps: 0 };
        let out = train(&mut env, &small_cfg(0), 7, |_| {}).unwrap();
        assert!(out.curve.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let fresh = SacAgent::<f32>::new(env.obs_config().dim(), small_cfg(0), &mut rng);
        assert_eq!(out.policy.actor, fresh.actor);
    }

    #[test]
    fn same_seed_same_curve() {
        let run = || {
            let mut env = LineEnv { x: 0.0, steps: 0 };
            train(&mut env, &small_cfg(300), 3, |_| {}).unwrap().curve
        };
        let a = run();
        assert_eq!(a.len(), 6);
        assert_eq!(a, run());
    }

    #[test]
    fn learns_to_move_toward_goal() {
        let mut env = LineEnv { x: 0.0, steps: 0 };
        let cfg = SacConfig { lr_actor: 1e-3, ..small_cfg(1500) };
        let out = train(&mut env, &cfg, 1, |_| {}).unwrap();
        let last = out.curve.last().unwrap();
        assert!(last.avg_return > 11.0, "{last:?}");
    }
}
