//! Reduced-order soccer environment.

pub mod body;
pub mod events;
pub mod observation;
pub mod scenario;
pub mod world;

pub use body::{BodyModel, RobotState};
pub use events::{detect_events, Event};
pub use observation::{observe, Observation58, OBS_DIM};
pub use scenario::{reset, Scenario};
pub use world::{Ball, EnvConfig, Robot, StepReport, World};
