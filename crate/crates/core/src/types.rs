//! Robot and pedestrian state types shared by every module.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

/// A 2D point or vector in meters (or m/s for velocities).
pub type Point = Vector2<f64>;

/// Maximum robot linear speed (m/s).
pub const V_MAX: f64 = 1.0;
/// Maximum robot angular speed (rad/s).
#[allow(clippy::approx_constant)]
pub const OMEGA_MAX: f64 = 3.14;
/// Simulation, MPC rollout and replay timestep (s).
pub const DT: f64 = 0.1;
/// Observation radius of the robot (m).
pub const R_OBS: f64 = 5.0;
/// Collision radius, also the collision-detection threshold (m).
pub const D_C: f64 = 0.5;
/// Low-level control steps per high-level policy decision.
pub const MACRO_STEPS: usize = 10;

/// Pose of the unicycle robot together with the last executed control.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// Heading, always in (-pi, pi].
    pub theta: f64,
    pub v_last: f64,
    pub omega_last: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: crate::dynamics::wrap_angle(theta),
            v_last: 0.0,
            omega_last: 0.0,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn heading(&self) -> Point {
        Point::new(self.theta.cos(), self.theta.sin())
    }

    /// Velocity vector implied by the last executed control.
    pub fn velocity(&self) -> Point {
        self.heading() * self.v_last
    }

    /// Rotates a world-frame vector into the robot frame.
    pub fn to_local(&self, v: Point) -> Point {
        let (s, c) = self.theta.sin_cos();
        Point::new(c * v.x + s * v.y, -s * v.x + c * v.y)
    }

    /// Rotates a robot-frame vector into the world frame.
    pub fn to_world(&self, v: Point) -> Point {
        let (s, c) = self.theta.sin_cos();
        Point::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.theta.is_finite()
            && self.v_last.is_finite()
            && self.omega_last.is_finite()
    }
}

/// Observed pedestrian: position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HumanState {
    pub id: u32,
    pub px: f64,
    pub py: f64,
    pub vx: f64,
    pub vy: f64,
}

impl HumanState {
    pub fn new(id: u32, px: f64, py: f64, vx: f64, vy: f64) -> Self {
        Self { id, px, py, vx, vy }
    }

    pub fn position(&self) -> Point {
        Point::new(self.px, self.py)
    }

    pub fn velocity(&self) -> Point {
        Point::new(self.vx, self.vy)
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

/// Unicycle control input.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub v: f64,
    pub omega: f64,
}

impl Control {
    pub const STOP: Control = Control { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    /// Projects onto the admissible box `[0, V_MAX] x [-OMEGA_MAX, OMEGA_MAX]`.
    /// Non-finite components become zero.
    pub fn clamped(self) -> Self {
        let fix = |x: f64| if x.is_finite() { x } else { 0.0 };
        Self {
            v: fix(self.v).clamp(0.0, V_MAX),
            omega: fix(self.omega).clamp(-OMEGA_MAX, OMEGA_MAX),
        }
    }

    pub fn is_admissible(&self) -> bool {
        self.v.is_finite()
            && self.omega.is_finite()
            && (0.0..=V_MAX).contains(&self.v)
            && self.omega.abs() <= OMEGA_MAX
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub gx: f64,
    pub gy: f64,
}

impl Goal {
    pub fn new(gx: f64, gy: f64) -> Self {
        Self { gx, gy }
    }

    pub fn position(&self) -> Point {
        Point::new(self.gx, self.gy)
    }
}

impl From<Point> for Goal {
    fn from(p: Point) -> Self {
        Self { gx: p.x, gy: p.y }
    }
}
