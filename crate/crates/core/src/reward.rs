//! Per-step reward: sparse goal bonus, dense progress term and the crowd
//! following score.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::wrap_angle;
use crate::grouping::GroupSet;
use crate::types::{Goal, Point, RobotState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardParams {
    pub lambda_d: f64,
    pub lambda_f: f64,
    pub sigma_v: f64,
    pub sigma_theta: f64,
    pub goal_radius: f64,
    pub goal_bonus: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            lambda_d: 1.0,
            lambda_f: 1.0,
            sigma_v: 0.5,
            sigma_theta: PI / 12.0,
            goal_radius: 0.5,
            goal_bonus: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_goal: f64,
    pub r_dist: f64,
    pub r_follow: f64,
    pub total: f64,
}

impl RewardBreakdown {
    /// Goal and progress terms only; independent of the following weight.
    pub fn task(&self, params: &RewardParams) -> f64 {
        self.r_goal + params.lambda_d * self.r_dist
    }
}

pub fn goal_reward(pos: &Point, goal: &Goal, params: &RewardParams) -> f64 {
    if (pos - goal.position()).norm() <= params.goal_radius {
        params.goal_bonus
    } else {
        0.0
    }
}

/// Progress toward the goal between two consecutive positions.
pub fn dense_reward(prev: &Point, cur: &Point, goal: &Goal) -> f64 {
    let g = goal.position();
    (prev - g).norm() - (cur - g).norm()
}

/// Score of one group: speed, heading and distance Gaussians multiplied.
pub fn group_score(robot: &RobotState, speed: f64, heading: f64, distance: f64, params: &RewardParams) -> f64 {
    let dv = (robot.v_last - speed) / params.sigma_v;
    let dth = wrap_angle(robot.theta - heading) / params.sigma_theta;
    (-dv * dv).exp() * (-dth * dth).exp() * (-distance * distance).exp()
}

/// Best group score; 0 when there are no groups.
pub fn follow_reward(robot: &RobotState, groups: &GroupSet, params: &RewardParams) -> f64 {
    let p = robot.position();
    groups
        .groups
        .iter()
        .map(|g| group_score(robot, g.mean_speed, g.mean_heading, g.distance_to(&p), params))
        .fold(0.0, f64::max)
}

pub fn step_reward(
    robot_prev: &RobotState,
    robot_cur: &RobotState,
    goal: &Goal,
    groups: &GroupSet,
    params: &RewardParams,
) -> RewardBreakdown {
    let cur = robot_cur.position();
    let r_goal = goal_reward(&cur, goal, params);
    let r_dist = dense_reward(&robot_prev.position(), &cur, goal);
    let r_follow = follow_reward(robot_cur, groups, params);
    RewardBreakdown {
        r_goal,
        r_dist,
        r_follow,
        total: r_goal + params.lambda_d * r_dist + params.lambda_f * r_follow,
    }
}
