//! Physically plausible articulated human motion reconstruction.
//!
//! Given noisy per-frame kinematic poses, 2D landmark detections and a camera,
//! this crate estimates the ground plane, refines the kinematics, and then
//! recovers a dynamically consistent motion by forward-simulating a
//! torque-controlled character and optimizing spline-parameterized control
//! targets with CMA-ES against a composite image/pose/physics objective.

pub mod body;
pub mod clip;
pub mod error;
pub mod io;
pub mod kinematics;
pub mod math;
pub mod model;
pub mod numopt;
pub mod objectives;
pub mod observations;
pub mod plane;
pub mod sim;
pub mod spline;
pub mod state;

pub use error::{Error, Result};
