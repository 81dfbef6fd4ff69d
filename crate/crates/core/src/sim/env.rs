//! Training environment: one action is a follow point held for a macro-step
//! of MPC control.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::engine::Episode;
use super::planners::follow_to_world;
use super::{Outcome, SimError, SimParams};
use crate::data::{sample_episode, EpisodeSampling, EpisodeSpec, Segment, Setting, TrajectoryDataset};
use crate::mpc::plan;
use crate::policy::{encode_observation, FollowPoint, MacroEnv, MacroStep, ObsConfig, Observation};
use crate::types::MACRO_STEPS;

/// Cycles through a fixed pool of training episodes, reshuffled (seeded)
/// at the start of every pass.
#[derive(Debug, Clone)]
pub struct HiCrowdEnv {
    ds: Arc<TrajectoryDataset>,
    pool: Vec<EpisodeSpec>,
    params: SimParams,
    obs: ObsConfig,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    episode: Option<Episode>,
}

impl HiCrowdEnv {
    pub fn new(
        ds: Arc<TrajectoryDataset>,
        pool: Vec<EpisodeSpec>,
        params: SimParams,
        obs: ObsConfig,
        seed: u64,
    ) -> Result<Self, SimError> {
        if pool.is_empty() {
            return Err(SimError::NoEpisodes);
        }
        // stream 3: the trainer draws from streams 0-2 of the same seed
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(3);
        let order = (0..pool.len()).collect();
        Ok(Self { ds, pool, params, obs, rng, order, cursor: usize::MAX, episode: None })
    }

    /// Samples `n` training episodes round-robin over `segments`.
    pub fn sample_pool<R: Rng>(
        segments: &[Segment],
        setting: Setting,
        sampling: &EpisodeSampling,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<EpisodeSpec>, SimError> {
        if segments.is_empty() {
            return Err(SimError::BadSpec("no segments to sample from".into()));
        }
        Ok((0..n)
            .map(|k| sample_episode(&segments[k % segments.len()], setting, sampling, rng))
            .collect::<Result<_, _>>()?)
    }

    pub fn episode(&self) -> Option<&Episode> {
        self.episode.as_ref()
    }

    fn observe(&self, ep: &Episode) -> Observation {
        encode_observation(ep.robot(), ep.goal(), &ep.visible(), &self.obs)
    }
}

impl MacroEnv for HiCrowdEnv {
    type Error = SimError;

    fn obs_config(&self) -> ObsConfig {
        self.obs
    }

    fn reset(&mut self) -> Result<Observation, SimError> {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let spec = self.pool[self.order[self.cursor]];
        self.cursor += 1;
        let ep = Episode::new(spec, self.ds.clone(), self.params.clone())?;
        let obs = self.observe(&ep);
        self.episode = Some(ep);
        Ok(obs)
    }

    fn step(&mut self, action: FollowPoint) -> Result<MacroStep, SimError> {
        let ep = self.episode.as_mut().ok_or(SimError::Finished)?;
        let world = follow_to_world(ep.robot(), &action);
        let (mut reward, mut task) = (0.0, 0.0);
        for _ in 0..MACRO_STEPS {
            let step = ep.step_index();
            let (u, _) = plan(ep.robot(), &ep.visible(), &world, &ep.params().mpc)
                .map_err(|e| SimError::Planner { step, msg: e.to_string() })?;
            let rec = ep.step(u, Some(action), Some(world))?;
            reward += rec.reward.total;
            task += rec.reward.task(&self.params.reward);
            if ep.outcome().is_some() {
                break;
            }
        }
        let outcome = ep.outcome();
        let ep = self.episode.as_ref().expect("present");
        Ok(MacroStep {
            obs: self.observe(ep),
            reward,
            task_reward: task,
            terminal: matches!(outcome, Some(Outcome::Success | Outcome::Collision)),
            episode_over: outcome.is_some(),
        })
    }
}
