//! Running trained controllers: evaluation, matches, training runs and
//! their on-disk artefacts.

pub mod arena;
pub mod config;
pub mod curves;
pub mod eval;
pub mod matchplay;
pub mod metrics;
pub mod train;

pub use arena::{Brain, Controller, NullController, PolicyController};
pub use config::RunConfig;
