//! Planning, optimization and verification of pre-distributed entanglement
//! ("resource states") for top-down quantum networks with optional
//! satellite-supplied EPR pairs and distance-constrained entanglement
//! sharing.

pub mod app;
pub mod checker;
pub mod error;
pub mod graphstate;
pub mod harness;
pub mod multigraph;
pub mod oracle;
pub mod planner;
pub mod taskgen;
pub mod topology;

pub use error::{Error, Result};
