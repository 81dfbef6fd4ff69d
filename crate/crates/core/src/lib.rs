//! Crowd navigation with a high-level follow-point policy and a low-level
//! sampling MPC.

pub mod data;
pub mod dynamics;
pub mod grouping;
pub mod mpc;
pub mod orca;
pub mod policy;
pub mod reward;
pub mod sim;
pub mod types;

pub use dynamics::{step_unicycle, step_unicycle_arc, wrap_angle};
pub use types::*;
