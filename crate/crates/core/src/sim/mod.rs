//! Episode simulation: offline replay and online reactive crowds, the planner
//! hierarchy, termination and metrics.

pub mod engine;
pub mod env;
pub mod export;
pub mod metrics;
pub mod planners;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, EpisodeSpec};
use crate::grouping::GroupingParams;
use crate::mpc::MpcParams;
use crate::orca::{OrcaParams, PEDESTRIAN_MAX_SPEED, PEDESTRIAN_RADIUS};
use crate::policy::FollowPoint;
use crate::reward::{RewardBreakdown, RewardParams};
use crate::types::{Control, Goal, HumanState, Point, RobotState, D_C, DT, R_OBS};

pub use engine::{run_episode, Episode};
pub use env::HiCrowdEnv;
pub use export::{parse_trace, write_metrics_csv, write_trace};
pub use metrics::{compute_metrics, evaluate, MetricTable};
pub use planners::{HiCrowdPlanner, MpcPlanner, OrcaPlanner, Planner, PlannerInput, PlannerOutput};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub dt: f64,
    pub r_obs: f64,
    /// Robot-pedestrian center distance counted as a collision (m).
    pub collision_distance: f64,
    /// Episode time limit as a multiple of the straight-line travel time.
    pub timeout_factor: f64,
    /// Executed speed under which a step counts as frozen (m/s).
    pub freeze_eps: f64,
    pub robot_radius: f64,
    pub ped_radius: f64,
    pub ped_max_speed: f64,
    /// Online pedestrians closer than this to their goal leave the scene (m).
    pub ped_goal_tolerance: f64,
    pub reward: RewardParams,
    pub grouping: GroupingParams,
    pub mpc: MpcParams,
    pub orca: OrcaParams,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: DT,
            r_obs: R_OBS,
            collision_distance: D_C,
            timeout_factor: 3.0,
            freeze_eps: 0.01,
            robot_radius: D_C - PEDESTRIAN_RADIUS,
            ped_radius: PEDESTRIAN_RADIUS,
            ped_max_speed: PEDESTRIAN_MAX_SPEED,
            ped_goal_tolerance: PEDESTRIAN_RADIUS,
            reward: RewardParams::default(),
            grouping: GroupingParams::default(),
            mpc: MpcParams::default(),
            orca: OrcaParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("planner failed at step {step}: {msg}")]
    Planner { step: usize, msg: String },
    #[error("robot dynamics: {0}")]
    Dynamics(#[from] crate::dynamics::DynamicsError),
    #[error("grouping: {0}")]
    Grouping(#[from] crate::grouping::GroupingError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("episode references segment/frame outside the dataset: {0}")]
    BadSpec(String),
    #[error("episode already finished")]
    Finished,
    #[error("no episodes to aggregate")]
    NoEpisodes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    /// Robot state after the step.
    pub robot: RobotState,
    pub control: Control,
    /// Pedestrians the planner saw when choosing `control`.
    pub visible: Vec<HumanState>,
    /// Follow point as emitted (robot frame at the decision step).
    pub follow: Option<FollowPoint>,
    /// The same follow point in world coordinates.
    pub follow_world: Option<Point>,
    pub reward: RewardBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub spec: EpisodeSpec,
    pub planner: String,
    pub initial: RobotState,
    pub goal: Goal,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
    pub navigation_time: f64,
    pub path_length: f64,
    /// Smallest robot-pedestrian distance seen; `None` when no pedestrian was
    /// ever present.
    pub min_ped_distance: Option<f64>,
    pub frozen_steps: usize,
    /// Steps eligible for the freezing statistic (all but a final stop at
    /// the goal).
    pub freeze_steps: usize,
}
