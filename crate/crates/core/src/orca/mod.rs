//! Reciprocal collision avoidance for disc agents.

pub mod lp;

use serde::{Deserialize, Serialize};

use crate::dynamics::wrap_angle;
use crate::types::{Control, Point, OMEGA_MAX, V_MAX};
pub use lp::{clamp_norm, Line};
use lp::det;

/// Relative tolerance under which a neighbor sits on the line of relative
/// motion.
const TIE_EPS: f64 = 1e-9;
/// Left rotation applied to the preferred velocity in exact head-on
/// encounters, so both agents pass on their left (rad).
const TIE_TURN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrcaAgent {
    pub position: Point,
    pub velocity: Point,
    pub radius: f64,
    pub max_speed: f64,
    pub pref_velocity: Point,
    /// Whether this agent also avoids others. Agents that do not (replayed
    /// pedestrians) get the full avoidance effort of their neighbors.
    pub reciprocal: bool,
}

impl OrcaAgent {
    pub fn new(position: Point, velocity: Point, radius: f64, max_speed: f64, pref_velocity: Point) -> Self {
        Self { position, velocity, radius, max_speed, pref_velocity, reciprocal: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrcaParams {
    pub time_horizon: f64,
    pub neighbor_dist: f64,
    /// Share of the avoidance taken on against reciprocating neighbors.
    pub responsibility: f64,
}

impl Default for OrcaParams {
    fn default() -> Self {
        Self { time_horizon: 2.0, neighbor_dist: 5.0, responsibility: 0.5 }
    }
}

/// Pedestrian disc radius (m).
pub const PEDESTRIAN_RADIUS: f64 = 0.25;
/// Pedestrian speed cap in the online setting (m/s).
pub const PEDESTRIAN_MAX_SPEED: f64 = 1.75;

/// ORCA half-plane induced on `agent` by `other`.
pub fn orca_line(agent: &OrcaAgent, other: &OrcaAgent, params: &OrcaParams, dt: f64) -> Line {
    let inv_tau = 1.0 / params.time_horizon;
    let rel_pos = other.position - agent.position;
    let rel_vel = agent.velocity - other.velocity;
    let dist_sq = rel_pos.norm_squared();
    let r = agent.radius + other.radius;
    let r_sq = r * r;

    let (direction, u) = if dist_sq > r_sq {
        let w = rel_vel - rel_pos * inv_tau;
        let w_len_sq = w.norm_squared();
        let dot1 = w.dot(&rel_pos);
        if dot1 < 0.0 && dot1 * dot1 > r_sq * w_len_sq {
            // closest to the cut-off circle
            let w_len = w_len_sq.sqrt();
            let unit_w = w / w_len;
            (Point::new(unit_w.y, -unit_w.x), unit_w * (r * inv_tau - w_len))
        } else {
            let leg = (dist_sq - r_sq).sqrt();
            let direction = if det(rel_pos, w) >= 0.0 {
                Point::new(rel_pos.x * leg - rel_pos.y * r, rel_pos.x * r + rel_pos.y * leg) / dist_sq
            } else {
                -Point::new(rel_pos.x * leg + rel_pos.y * r, -rel_pos.x * r + rel_pos.y * leg) / dist_sq
            };
            (direction, direction * rel_vel.dot(&direction) - rel_vel)
        }
    } else {
        // already overlapping: resolve within one step
        let inv_dt = 1.0 / dt;
        let w = rel_vel - rel_pos * inv_dt;
        let w_len = w.norm();
        let unit_w = if w_len > 0.0 {
            w / w_len
        } else if rel_pos.norm_squared() > 0.0 {
            -rel_pos.normalize()
        } else {
            Point::new(0.0, 1.0)
        };
        (Point::new(unit_w.y, -unit_w.x), unit_w * (r * inv_dt - w_len))
    };
    let share = if other.reciprocal { params.responsibility } else { 1.0 };
    Line { point: agent.velocity + u * share, direction }
}

/// True when `other` closes in exactly along the line joining the agents.
fn head_on(agent: &OrcaAgent, other: &OrcaAgent, params: &OrcaParams) -> bool {
    let rel_pos = other.position - agent.position;
    let w = agent.velocity - other.velocity - rel_pos / params.time_horizon;
    w.dot(&rel_pos) < 0.0 && det(rel_pos, w).abs() <= TIE_EPS * rel_pos.norm() * w.norm()
}

/// Collision-avoiding velocity for `agent` closest to its preferred velocity.
pub fn compute_orca_velocity(agent: &OrcaAgent, neighbors: &[OrcaAgent], params: &OrcaParams, dt: f64) -> Point {
    let range_sq = params.neighbor_dist * params.neighbor_dist;
    let near: Vec<&OrcaAgent> =
        neighbors.iter().filter(|o| (o.position - agent.position).norm_squared() < range_sq).collect();
    if near.is_empty() {
        return clamp_norm(agent.pref_velocity, agent.max_speed);
    }
    let lines: Vec<Line> = near.iter().map(|o| orca_line(agent, o, params, dt)).collect();
    let mut pref = agent.pref_velocity;
    if near.iter().any(|o| head_on(agent, o, params)) {
        let (s, c) = TIE_TURN.sin_cos();
        pref = Point::new(c * pref.x - s * pref.y, s * pref.x + c * pref.y);
    }
    clamp_norm(lp::solve(&lines, agent.max_speed, pref), agent.max_speed)
}

/// Unicycle command tracking a planar velocity: speed is the vector norm and
/// the heading error is turned over `dt_decision`.
pub fn holonomic_to_differential(v_vec: Point, theta: f64, dt_decision: f64) -> Control {
    let speed = v_vec.norm();
    if speed == 0.0 || !speed.is_finite() || dt_decision <= 0.0 {
        return Control::STOP;
    }
    let turn = wrap_angle(v_vec.y.atan2(v_vec.x) - theta);
    Control::new(speed.min(V_MAX), (turn / dt_decision).clamp(-OMEGA_MAX, OMEGA_MAX))
}

/// Synchronous update of a set of mutually avoiding agents.
pub fn step_agents(agents: &mut [OrcaAgent], params: &OrcaParams, dt: f64) {
    let new_v: Vec<Point> = (0..agents.len())
        .map(|i| {
            let others: Vec<OrcaAgent> =
                agents.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, a)| *a).collect();
            compute_orca_velocity(&agents[i], &others, params, dt)
        })
        .collect();
    for (a, v) in agents.iter_mut().zip(new_v) {
        a.velocity = v;
        a.position += v * dt;
    }
}
