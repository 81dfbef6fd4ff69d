//! Unicycle transition model.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

use crate::types::{Control, RobotState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite robot state {0:?}")]
    NonFiniteState(RobotState),
    #[error("control {0:?} is non-finite or outside the admissible box")]
    InvalidControl(Control),
    #[error("timestep must be finite and positive, got {0}")]
    InvalidTimestep(f64),
}

/// Wraps an angle into `(-pi, pi]`; `-pi` maps to `pi`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

fn validate(state: &RobotState, u: &Control, dt: f64) -> Result<(), DynamicsError> {
    if !state.is_finite() {
        return Err(DynamicsError::NonFiniteState(*state));
    }
    if !u.is_admissible() {
        return Err(DynamicsError::InvalidControl(*u));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DynamicsError::InvalidTimestep(dt));
    }
    Ok(())
}

/// Explicit Euler step of the unicycle. Position advances along the current
/// heading, then the heading integrates `omega`.
pub fn step_unicycle(state: &RobotState, u: &Control, dt: f64) -> Result<RobotState, DynamicsError> {
    validate(state, u, dt)?;
    Ok(euler(state, u, dt))
}

/// Unchecked Euler step used by rollouts that validated their inputs once.
#[inline]
pub(crate) fn euler(state: &RobotState, u: &Control, dt: f64) -> RobotState {
    let (s, c) = state.theta.sin_cos();
    RobotState {
        x: state.x + u.v * c * dt,
        y: state.y + u.v * s * dt,
        theta: wrap_angle(state.theta + u.omega * dt),
        v_last: u.v,
        omega_last: u.omega,
    }
}

/// Exact integration of a constant control: a circular arc of radius
/// `v / omega`, or a straight segment when `omega == 0`.
///
/// Only finiteness is checked, so the closed form can be evaluated outside the
/// robot's control box.
pub fn step_unicycle_arc(state: &RobotState, u: &Control, dt: f64) -> Result<RobotState, DynamicsError> {
    if !state.is_finite() {
        return Err(DynamicsError::NonFiniteState(*state));
    }
    if !(u.v.is_finite() && u.omega.is_finite()) {
        return Err(DynamicsError::InvalidControl(*u));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DynamicsError::InvalidTimestep(dt));
    }
    if u.omega == 0.0 {
        return Ok(euler(state, u, dt));
    }
    let r = u.v / u.omega;
    let th1 = state.theta + u.omega * dt;
    Ok(RobotState {
        x: state.x + r * (th1.sin() - state.theta.sin()),
        y: state.y - r * (th1.cos() - state.theta.cos()),
        theta: wrap_angle(th1),
        v_last: u.v,
        omega_last: u.omega,
    })
}
