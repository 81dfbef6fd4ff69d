//! Robot planners: the hierarchical follow-point planner and the baselines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mpc::{plan, MpcError, MpcParams};
use crate::orca::{clamp_norm, compute_orca_velocity, holonomic_to_differential, OrcaAgent, OrcaParams};
use crate::policy::{encode_observation, ActMode, FollowPoint, Policy};
use crate::types::{Control, Goal, HumanState, Point, RobotState, DT, MACRO_STEPS, V_MAX};

pub struct PlannerInput<'a> {
    pub step: usize,
    pub robot: &'a RobotState,
    /// Pedestrians within the observation radius.
    pub humans: &'a [HumanState],
    pub goal: &'a Goal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerOutput {
    pub control: Control,
    pub follow: Option<FollowPoint>,
    pub follow_world: Option<Point>,
}

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error("{0}")]
    Other(String),
}

pub trait Planner {
    fn name(&self) -> String;
    /// Called at the start of every episode with the episode seed.
    fn reset(&mut self, _seed: u64) {}
    fn act(&mut self, input: &PlannerInput) -> Result<PlannerOutput, PlannerError>;
}

/// Sampling MPC tracking the goal directly.
#[derive(Debug, Clone)]
pub struct MpcPlanner {
    pub params: MpcParams,
}

impl Planner for MpcPlanner {
    fn name(&self) -> String {
        "mpc".into()
    }

    fn act(&mut self, input: &PlannerInput) -> Result<PlannerOutput, PlannerError> {
        let (control, _) = plan(input.robot, input.humans, &input.goal.position(), &self.params)?;
        Ok(PlannerOutput { control, follow: None, follow_world: None })
    }
}

/// Policy picks a follow point every `MACRO_STEPS` steps; the MPC tracks it
/// in between.
#[derive(Debug, Clone)]
pub struct HiCrowdPlanner {
    pub policy: Policy,
    pub mpc: MpcParams,
    pub mode: ActMode,
    rng: ChaCha8Rng,
    active: Option<(FollowPoint, Point)>,
}

impl HiCrowdPlanner {
    pub fn new(policy: Policy, mpc: MpcParams, mode: ActMode) -> Self {
        Self { policy, mpc, mode, rng: ChaCha8Rng::seed_from_u64(0), active: None }
    }
}

/// World position of a robot-frame follow point.
pub fn follow_to_world(robot: &RobotState, f: &FollowPoint) -> Point {
    robot.position() + robot.to_world(f.as_point())
}

impl Planner for HiCrowdPlanner {
    fn name(&self) -> String {
        "hicrowd".into()
    }

    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.active = None;
    }

    fn act(&mut self, input: &PlannerInput) -> Result<PlannerOutput, PlannerError> {
        if input.step.is_multiple_of(MACRO_STEPS) || self.active.is_none() {
            let obs = encode_observation(input.robot, input.goal, input.humans, &self.policy.obs);
            let f = self.policy.act(&obs, self.mode, &mut self.rng);
            self.active = Some((f, follow_to_world(input.robot, &f)));
        }
        let (f, world) = self.active.expect("set above");
        let (control, _) = plan(input.robot, input.humans, &world, &self.mpc)?;
        Ok(PlannerOutput { control, follow: Some(f), follow_world: Some(world) })
    }
}

/// Reciprocal avoidance on the robot's preferred velocity toward the goal,
/// converted to unicycle commands.
#[derive(Debug, Clone)]
pub struct OrcaPlanner {
    pub params: OrcaParams,
    pub robot_radius: f64,
    pub ped_radius: f64,
    /// Period over which the heading error is turned (s).
    pub dt_decision: f64,
}

impl Default for OrcaPlanner {
    fn default() -> Self {
        Self {
            params: OrcaParams::default(),
            robot_radius: crate::orca::PEDESTRIAN_RADIUS,
            ped_radius: crate::orca::PEDESTRIAN_RADIUS,
            dt_decision: DT,
        }
    }
}

impl Planner for OrcaPlanner {
    fn name(&self) -> String {
        "orca".into()
    }

    fn act(&mut self, input: &PlannerInput) -> Result<PlannerOutput, PlannerError> {
        let pos = input.robot.position();
        let me = OrcaAgent::new(
            pos,
            input.robot.velocity(),
            self.robot_radius,
            V_MAX,
            clamp_norm(input.goal.position() - pos, V_MAX),
        );
        let others: Vec<OrcaAgent> = input
            .humans
            .iter()
            .map(|h| OrcaAgent::new(h.position(), h.velocity(), self.ped_radius, f64::INFINITY, h.velocity()))
            .collect();
        let v = compute_orca_velocity(&me, &others, &self.params, DT);
        Ok(PlannerOutput {
            control: holonomic_to_differential(v, input.robot.theta, self.dt_decision),
            follow: None,
            follow_world: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{ObsConfig, SacAgent, SacConfig};

    fn input<'a>(step: usize, robot: &'a RobotState, goal: &'a Goal) -> PlannerInput<'a> {
        PlannerInput { step, robot, humans: &[], goal }
    }

    #[test]
    fn mpc_heads_for_goal() {
        let r = RobotState::new(0.0, 0.0, 0.0);
        let g = Goal::new(3.0, 0.0);
        let out = MpcPlanner { params: MpcParams::default() }.act(&input(0, &r, &g)).unwrap();
        assert_eq!(out.control, Control::new(1.0, 0.0));
    }

    #[test]
    fn hicrowd_holds_follow_point_between_decisions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let obs = ObsConfig::default();
        let agent = SacAgent::<f32>::new(obs.dim(), SacConfig { hidden: vec![16, 16], ..Default::default() }, &mut rng);
        let mut p = HiCrowdPlanner::new(Policy::from_agent(&agent, obs), MpcParams::default(), ActMode::Stochastic);
        p.reset(1);
        let g = Goal::new(5.0, 2.0);
        let mut seen = Vec::new();
        for step in 0..25 {
            let r = RobotState::new(step as f64 * 0.1, 0.0, 0.2);
            seen.push(p.act(&input(step, &r, &g)).unwrap().follow_world.unwrap());
        }
        for k in 1..25 {
            if k % MACRO_STEPS != 0 {
                assert_eq!(seen[k], seen[k - 1]);
            }
        }
        assert_ne!(seen[9], seen[10]);
    }

    #[test]
    fn follow_point_frame_conversion() {
        let r = RobotState::new(1.0, 2.0, std::f64::consts::FRAC_PI_2);
        let w = follow_to_world(&r, &FollowPoint::new(1.0, 0.0));
        assert!((w - Point::new(1.0, 3.0)).norm() < 1e-12);
    }

    #[test]
    fn orca_planner_drives_straight_in_free_space() {
        let r = RobotState::new(0.0, 0.0, 0.0);
        let g = Goal::new(4.0, 0.0);
        let out = OrcaPlanner::default().act(&input(0, &r, &g)).unwrap();
        assert_eq!(out.control, Control::new(1.0, 0.0));
    }
}
