//! Modular control for a small biped soccer robot.
//!
//! An open-loop oscillator produces a stepping rhythm and two learned
//! residual policies shape it: one seeks and kicks the ball, the other gets
//! the robot back up after a fall. A posture arbiter decides which policy is
//! in charge. Both policies are trained with PPO in a reduced-order physics
//! environment, the recovery policy under a decaying assist curriculum.

pub mod arbiter;
pub mod curriculum;
pub mod error;
pub mod gait;
pub mod harness;
pub mod reward;
pub mod sim;
pub mod task;
pub mod trainer;

pub use error::{Error, Result};
