//! Sampling MPC over a lattice of constant controls.
//!
//! Every candidate holds one `(v, omega)` pair for the whole horizon. A
//! candidate is scored by how close its predicted trajectory gets to the
//! follow point plus a discounted exponential proximity penalty against
//! constant-velocity pedestrian predictions. The first control of the best
//! candidate is applied.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::euler;
use crate::types::{Control, HumanState, Point, RobotState, DT, D_C, OMEGA_MAX, R_OBS, V_MAX};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpcError {
    #[error("invalid MPC parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite planner input")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcParams {
    pub horizon: usize,
    pub beta: f64,
    pub d_c: f64,
    pub dt: f64,
    /// Pedestrians farther than this from the robot are ignored.
    pub r_obs: f64,
    pub v_grid: Vec<f64>,
    pub omega_grid: Vec<f64>,
}

impl Default for MpcParams {
    fn default() -> Self {
        Self {
            horizon: 10,
            beta: 0.9,
            d_c: D_C,
            dt: DT,
            r_obs: R_OBS,
            v_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            omega_grid: uniform_grid(-OMEGA_MAX, OMEGA_MAX, 13),
        }
    }
}

/// `n` evenly spaced values from `lo` to `hi`, endpoints exact.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    hi
                } else {
                    let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
                    // snap the centre of a symmetric grid to an exact zero
                    if x.abs() < 1e-12 {
                        0.0
                    } else {
                        x
                    }
                }
            })
            .collect(),
    }
}

impl MpcParams {
    pub fn validate(&self) -> Result<(), MpcError> {
        let bad = |m: &str| Err(MpcError::InvalidParams(m.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !self.d_c.is_finite() || self.r_obs.is_nan() {
            return bad("d_c and r_obs must be finite");
        }
        if self.v_grid.is_empty() || self.omega_grid.is_empty() {
            return bad("control grids must be non-empty");
        }
        if self.v_grid.iter().any(|v| !(0.0..=V_MAX).contains(v)) {
            return bad("v_grid values must lie in [0, v_max]");
        }
        if self.omega_grid.iter().any(|w| !(w.abs() <= OMEGA_MAX)) {
            return bad("omega_grid values must lie in [-omega_max, omega_max]");
        }
        Ok(())
    }

    pub fn candidate_count(&self) -> usize {
        self.v_grid.len() * self.omega_grid.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePlan {
    pub controls: Vec<Control>,
    pub trajectory: Vec<RobotState>,
    pub j_follow: f64,
    pub j_safe: f64,
    pub j_total: f64,
}

/// Constant-velocity extrapolation. Row `k` holds every pedestrian's position
/// `k + 1` steps ahead.
pub fn predict_humans_cvm(humans: &[HumanState], horizon: usize, dt: f64) -> Vec<Vec<Point>> {
    (1..=horizon)
        .map(|tau| {
            let t = tau as f64 * dt;
            humans
                .iter()
                .map(|h| Point::new(h.px + t * h.vx, h.py + t * h.vy))
                .collect()
        })
        .collect()
}

/// Closest approach of the trajectory to the follow point.
pub fn follow_cost(trajectory: &[Point], follow: &Point) -> f64 {
    trajectory
        .iter()
        .map(|p| (p - follow).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Discounted proximity penalty; `trajectory[k]` pairs with `predictions[k]`.
pub fn safety_cost(trajectory: &[Point], predictions: &[Vec<Point>], params: &MpcParams) -> f64 {
    let mut total = 0.0;
    let mut weight = 1.0;
    for (p, humans) in trajectory.iter().zip(predictions) {
        let mut step = 0.0;
        for h in humans {
            step += (params.d_c - (p - h).norm()).exp();
        }
        total += weight * step;
        weight *= params.beta;
    }
    total
}

/// Rolls a constant control forward `horizon` steps, excluding the start.
pub fn rollout(robot: &RobotState, u: &Control, horizon: usize, dt: f64) -> Vec<RobotState> {
    let mut out = Vec::with_capacity(horizon);
    let mut s = *robot;
    for _ in 0..horizon {
        s = euler(&s, u, dt);
        out.push(s);
    }
    out
}

/// Pedestrians within `r_obs` of the robot.
pub fn visible_humans(robot: &RobotState, humans: &[HumanState], r_obs: f64) -> Vec<HumanState> {
    let p = robot.position();
    humans
        .iter()
        .filter(|h| (h.position() - p).norm() <= r_obs)
        .copied()
        .collect()
}

/// Ordering used to pick the winner: cost, then |omega|, then v, then the
/// lattice index.
fn better(a: (f64, Control, usize), b: (f64, Control, usize)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.omega.abs().total_cmp(&b.1.omega.abs()))
        .then(a.1.v.total_cmp(&b.1.v))
        .then(a.2.cmp(&b.2))
}

/// Selects the lattice candidate with the smallest total cost and returns its
/// first control together with the full scored candidate.
pub fn plan(
    robot: &RobotState,
    humans: &[HumanState],
    follow: &Point,
    params: &MpcParams,
) -> Result<(Control, CandidatePlan), MpcError> {
    params.validate()?;
    if !robot.is_finite() || !follow.x.is_finite() || !follow.y.is_finite() {
        return Err(MpcError::NonFinite);
    }
    let visible = visible_humans(robot, humans, params.r_obs);
    if visible.iter().any(|h| !(h.px.is_finite() && h.py.is_finite() && h.vx.is_finite() && h.vy.is_finite())) {
        return Err(MpcError::NonFinite);
    }
    let predictions = predict_humans_cvm(&visible, params.horizon, params.dt);

    let mut best: Option<(f64, Control, usize, f64, f64)> = None;
    let mut positions = Vec::with_capacity(params.horizon);
    let mut index = 0usize;
    for &v in &params.v_grid {
        for &omega in &params.omega_grid {
            let u = Control { v, omega };
            positions.clear();
            let mut s = *robot;
            for _ in 0..params.horizon {
                s = euler(&s, &u, params.dt);
                positions.push(s.position());
            }
            let jf = follow_cost(&positions, follow);
            let js = safety_cost(&positions, &predictions, params);
            let total = jf + js;
            let replace = match best {
                None => true,
                Some((bt, bu, bi, _, _)) => better((total, u, index), (bt, bu, bi)) == Ordering::Less,
            };
            if replace {
                best = Some((total, u, index, jf, js));
            }
            index += 1;
        }
    }
    let (j_total, u, _, j_follow, j_safe) = best.expect("non-empty grids");
    let plan = CandidatePlan {
        controls: vec![u; params.horizon],
        trajectory: rollout(robot, &u, params.horizon, params.dt),
        j_follow,
        j_safe,
        j_total,
    };
    Ok((u, plan))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn default_grid_shape() {
        let p = MpcParams::default();
        assert_eq!(p.candidate_count(), 65);
        assert_eq!(p.omega_grid[0], -OMEGA_MAX);
        assert_eq!(p.omega_grid[6], 0.0);
        assert_eq!(p.omega_grid[12], OMEGA_MAX);
        p.validate().unwrap();
    }

    #[test]
    fn cvm_examples() {
        let still = [HumanState::new(0, 0.0, 0.0, 0.0, 0.0)];
        assert!(predict_humans_cvm(&still, 7, 0.1).iter().all(|row| row[0] == Point::zeros()));

        let moving = [HumanState::new(0, 0.0, 0.0, 1.0, 0.0), HumanState::new(1, 2.0, 1.0, 0.0, -0.5)];
        let pred = predict_humans_cvm(&moving, 10, 0.1);
        assert_eq!(pred.len(), 10);
        assert!((pred[9][0] - Point::new(1.0, 0.0)).norm() < 1e-12);
        assert!((pred[9][1] - Point::new(2.0, 0.5)).norm() < 1e-12);
        let solo = predict_humans_cvm(&moving[1..], 10, 0.1);
        assert_eq!(solo[9][0], pred[9][1]);
    }

    #[test]
    fn follow_cost_examples() {
        let f = Point::new(1.0, 1.0);
        assert_eq!(follow_cost(&pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]), &f), 0.0);
        assert_eq!(follow_cost(&pts(&[(3.0, 1.0), (3.0, 1.0)]), &f), 2.0);
        let traj = rollout(&RobotState::default(), &Control::new(1.0, 0.0), 10, 0.1);
        let ps: Vec<Point> = traj.iter().map(|s| s.position()).collect();
        assert!((follow_cost(&ps, &Point::new(0.35, 0.0)) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn safety_cost_examples() {
        let p = MpcParams::default();
        assert_eq!(safety_cost(&pts(&[(0.0, 0.0)]), &[vec![]], &p), 0.0);

        let one = safety_cost(&pts(&[(0.0, 0.0)]), &[pts(&[(0.0, 0.0)])], &p);
        assert!((one - 0.5f64.exp()).abs() < 1e-15);
        assert!((one - 1.6487).abs() < 1e-4);

        let two = safety_cost(
            &pts(&[(0.0, 0.0), (1.0, 0.0)]),
            &[pts(&[(0.5, 0.0)]), pts(&[(1.0, 0.5)])],
            &p,
        );
        assert!((two - 1.9).abs() < 1e-12);
    }

    #[test]
    fn plan_open_space_goes_straight() {
        let (u, plan) = plan(
            &RobotState::default(),
            &[],
            &Point::new(2.0, 0.0),
            &MpcParams::default(),
        )
        .unwrap();
        assert_eq!(u, Control::new(1.0, 0.0));
        assert!((plan.j_follow - 1.0).abs() < 1e-12);
        assert_eq!(plan.j_safe, 0.0);
        assert_eq!(plan.trajectory.len(), 10);
    }

    #[test]
    fn plan_stays_when_at_follow_point() {
        let r = RobotState::new(1.0, -2.0, 0.4);
        let (u, plan) = plan(&r, &[], &r.position(), &MpcParams::default()).unwrap();
        assert_eq!(u, Control::STOP);
        assert_eq!(plan.j_total, 0.0);
    }

    #[test]
    fn plan_turns_around_oncoming_human() {
        // pedestrian 1 m ahead walking straight at the robot
        let humans = [HumanState::new(0, 1.0, 0.0, -1.0, 0.0)];
        let (u, _) = plan(&RobotState::default(), &humans, &Point::new(4.0, 0.0), &MpcParams::default()).unwrap();
        assert_ne!(u.omega, 0.0);
        assert_eq!(u, Control::new(1.0, MpcParams::default().omega_grid[5]));
    }

    #[test]
    fn plan_stops_for_standing_human() {
        let humans = [HumanState::new(0, 1.0, 0.0, 0.0, 0.0)];
        let (u, _) = plan(&RobotState::default(), &humans, &Point::new(2.0, 0.0), &MpcParams::default()).unwrap();
        assert_eq!(u, Control::STOP);
    }

    #[test]
    fn far_humans_ignored() {
        let far = [HumanState::new(0, 6.0, 0.0, 0.0, 0.0)];
        let a = plan(&RobotState::default(), &far, &Point::new(2.0, 0.0), &MpcParams::default()).unwrap();
        let b = plan(&RobotState::default(), &[], &Point::new(2.0, 0.0), &MpcParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = MpcParams { horizon: 0, ..Default::default() };
        assert!(plan(&RobotState::default(), &[], &Point::zeros(), &p).is_err());
        let p = MpcParams { v_grid: vec![], ..Default::default() };
        assert!(plan(&RobotState::default(), &[], &Point::zeros(), &p).is_err());
        let p = MpcParams { beta: 1.0, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
