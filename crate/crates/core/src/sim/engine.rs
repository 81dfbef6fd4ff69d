//! Step-by-step episode engine.

use std::sync::Arc;

use super::planners::{Planner, PlannerInput};
use super::{EpisodeRecord, Outcome, SimError, SimParams, StepRecord};
use crate::data::{EpisodeSpec, Setting, Track, TrajectoryDataset};
use crate::dynamics::step_unicycle;
use crate::grouping::cluster_groups;
use crate::orca::{compute_orca_velocity, OrcaAgent};
use crate::policy::FollowPoint;
use crate::reward::step_reward;
use crate::types::{Control, Goal, HumanState, Point, RobotState, V_MAX};

#[derive(Debug, Clone)]
struct OnlinePed {
    id: u32,
    agent: OrcaAgent,
    goal: Point,
    speed: f64,
}

#[derive(Debug, Clone)]
enum Crowd {
    Offline,
    Online { peds: Vec<OnlinePed>, pending: Vec<Track> },
}

/// One running episode. The robot and crowd advance together on `step`.
#[derive(Debug, Clone)]
pub struct Episode {
    spec: EpisodeSpec,
    params: SimParams,
    ds: Arc<TrajectoryDataset>,
    frame: usize,
    crowd: Crowd,
    initial: RobotState,
    robot: RobotState,
    goal: Goal,
    time_limit: f64,
    steps: Vec<StepRecord>,
    path_length: f64,
    min_dist: Option<f64>,
    frozen: usize,
    outcome: Option<Outcome>,
}

impl Episode {
    pub fn new(spec: EpisodeSpec, ds: Arc<TrajectoryDataset>, params: SimParams) -> Result<Self, SimError> {
        if !ds.is_empty() && spec.start_frame >= ds.frames.len() {
            return Err(SimError::BadSpec(format!("start frame {} of {}", spec.start_frame, ds.frames.len())));
        }
        let to_goal = spec.goal - spec.start;
        let initial = RobotState::new(spec.start.x, spec.start.y, to_goal.y.atan2(to_goal.x));
        let crowd = match spec.setting {
            Setting::Offline => Crowd::Offline,
            Setting::Online => {
                let now = ds.frames.get(spec.start_frame).map(|f| f.humans.as_slice()).unwrap_or(&[]);
                let mut peds = Vec::new();
                let mut pending = Vec::new();
                for t in ds.tracks().into_values() {
                    if t.first > spec.start_frame {
                        pending.push(t);
                    } else if t.last >= spec.start_frame {
                        if let Some(h) = now.iter().find(|h| h.id == t.id) {
                            peds.push(online_ped(&t, h, &params));
                        }
                    }
                }
                // popped from the back in order of appearance
                pending.sort_by(|a, b| b.first.cmp(&a.first).then(b.id.cmp(&a.id)));
                Crowd::Online { peds, pending }
            }
        };
        let mut ep = Self {
            time_limit: params.timeout_factor * to_goal.norm() / V_MAX,
            spec,
            params,
            ds,
            frame: spec.start_frame,
            crowd,
            initial,
            robot: initial,
            goal: Goal::new(spec.goal.x, spec.goal.y),
            steps: Vec::new(),
            path_length: 0.0,
            min_dist: None,
            frozen: 0,
            outcome: None,
        };
        ep.min_dist = ep.nearest_human_distance();
        Ok(ep)
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn goal(&self) -> &Goal {
        &self.goal
    }

    pub fn spec(&self) -> &EpisodeSpec {
        &self.spec
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn step_index(&self) -> usize {
        self.steps.len()
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn time_limit(&self) -> f64 {
        self.time_limit
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    /// Every pedestrian in the current frame, sorted by id.
    pub fn humans(&self) -> Vec<HumanState> {
        match &self.crowd {
            Crowd::Offline => self.ds.frames.get(self.frame).map(|f| f.humans.clone()).unwrap_or_default(),
            Crowd::Online { peds, .. } => {
                let mut hs: Vec<HumanState> = peds
                    .iter()
                    .map(|p| HumanState::new(p.id, p.agent.position.x, p.agent.position.y, p.agent.velocity.x, p.agent.velocity.y))
                    .collect();
                hs.sort_by_key(|h| h.id);
                hs
            }
        }
    }

    /// Pedestrians within the observation radius of the robot.
    pub fn visible(&self) -> Vec<HumanState> {
        crate::mpc::visible_humans(&self.robot, &self.humans(), self.params.r_obs)
    }

    fn nearest_human_distance(&self) -> Option<f64> {
        let p = self.robot.position();
        self.humans().iter().map(|h| (h.position() - p).norm()).min_by(|a, b| a.total_cmp(b))
    }

    /// Applies one control: robot first, then the crowd, then termination
    /// checks on the new frame.
    pub fn step(
        &mut self,
        control: Control,
        follow: Option<FollowPoint>,
        follow_world: Option<Point>,
    ) -> Result<&StepRecord, SimError> {
        if self.outcome.is_some() {
            return Err(SimError::Finished);
        }
        let dt = self.params.dt;
        let visible = self.visible();
        let control = control.clamped();
        let prev = self.robot;
        let next = step_unicycle(&prev, &control, dt)?;
        self.advance_crowd(&prev);
        self.robot = next;
        self.path_length += (next.position() - prev.position()).norm();

        let nearest = self.nearest_human_distance();
        if let Some(d) = nearest {
            self.min_dist = Some(self.min_dist.map_or(d, |m| m.min(d)));
        }
        let k = self.steps.len() + 1;
        let t = k as f64 * dt;
        let at_goal = (next.position() - self.goal.position()).norm() <= self.params.reward.goal_radius;
        self.outcome = if nearest.is_some_and(|d| d < self.params.collision_distance) {
            Some(Outcome::Collision)
        } else if at_goal {
            Some(Outcome::Success)
        } else if t >= self.time_limit - 1e-9 {
            Some(Outcome::Timeout)
        } else {
            None
        };

        let groups = cluster_groups(&self.visible(), &self.params.grouping)?;
        let reward = step_reward(&prev, &next, &self.goal, &groups, &self.params.reward);
        let stopped_at_goal = self.outcome == Some(Outcome::Success) && control.v < self.params.freeze_eps;
        if control.v < self.params.freeze_eps && !stopped_at_goal {
            self.frozen += 1;
        }
        self.steps.push(StepRecord { t, robot: next, control, visible, follow, follow_world, reward });
        Ok(self.steps.last().expect("just pushed"))
    }

    fn advance_crowd(&mut self, robot: &RobotState) {
        self.frame += 1;
        let Crowd::Online { peds, pending } = &mut self.crowd else {
            return;
        };
        let p = &self.params;
        let robot_agent = OrcaAgent::new(robot.position(), robot.velocity(), p.robot_radius, V_MAX, Point::zeros());
        let agents: Vec<OrcaAgent> = peds.iter().map(|q| q.agent).collect();
        let new_v: Vec<Point> = peds
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let mut me = q.agent;
                let to_goal = q.goal - me.position;
                let dist = to_goal.norm();
                me.pref_velocity = if dist > 0.0 { to_goal * (q.speed.min(dist / p.dt) / dist) } else { Point::zeros() };
                let mut others: Vec<OrcaAgent> =
                    agents.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, a)| *a).collect();
                others.push(robot_agent);
                compute_orca_velocity(&me, &others, &p.orca, p.dt)
            })
            .collect();
        for (q, v) in peds.iter_mut().zip(new_v) {
            q.agent.velocity = v;
            q.agent.position += v * p.dt;
        }
        peds.retain(|q| (q.goal - q.agent.position).norm() >= p.ped_goal_tolerance);
        while pending.last().is_some_and(|t| t.first <= self.frame) {
            let t = pending.pop().expect("checked");
            if let Some(h) = self.ds.frames.get(t.first).and_then(|f| f.humans.iter().find(|h| h.id == t.id)) {
                peds.push(online_ped(&t, h, p));
            }
        }
    }

    /// Closes the episode into its record. Fails while the episode is still
    /// running.
    pub fn finish(self, planner: &str) -> Result<EpisodeRecord, SimError> {
        let Some(outcome) = self.outcome else {
            return Err(SimError::BadSpec("episode has not terminated".into()));
        };
        let eligible = match self.steps.last() {
            Some(s) if outcome == Outcome::Success && s.control.v < self.params.freeze_eps => self.steps.len() - 1,
            _ => self.steps.len(),
        };
        Ok(EpisodeRecord {
            spec: self.spec,
            planner: planner.to_string(),
            initial: self.initial,
            goal: self.goal,
            navigation_time: self.steps.len() as f64 * self.params.dt,
            steps: self.steps,
            outcome,
            path_length: self.path_length,
            min_ped_distance: self.min_dist,
            frozen_steps: self.frozen,
            freeze_steps: eligible,
        })
    }
}

fn online_ped(track: &Track, now: &HumanState, p: &SimParams) -> OnlinePed {
    let speed = track.mean_speed.min(p.ped_max_speed);
    let velocity = crate::orca::clamp_norm(now.velocity(), p.ped_max_speed);
    OnlinePed {
        id: track.id,
        agent: OrcaAgent::new(now.position(), velocity, p.ped_radius, p.ped_max_speed, Point::zeros()),
        goal: track.end,
        speed,
    }
}

/// Runs `planner` on one episode until it terminates.
pub fn run_episode(
    spec: &EpisodeSpec,
    ds: Arc<TrajectoryDataset>,
    params: &SimParams,
    planner: &mut dyn Planner,
) -> Result<EpisodeRecord, SimError> {
    let mut ep = Episode::new(*spec, ds, params.clone())?;
    planner.reset(spec.seed);
    while ep.outcome().is_none() {
        let visible = ep.visible();
        let input = PlannerInput { step: ep.step_index(), robot: ep.robot(), humans: &visible, goal: ep.goal() };
        let out = planner
            .act(&input)
            .map_err(|e| SimError::Planner { step: ep.step_index(), msg: e.to_string() })?;
        ep.step(out.control, out.follow, out.follow_world)?;
    }
    ep.finish(&planner.name())
}
