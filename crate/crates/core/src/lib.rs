//! Simulation workbench for rate-limited probing of evolving follower
//! networks: probe-selection strategies, link inference, global and
//! topic-weighted influence estimation, and evaluation against ground truth.

pub mod budget;
pub mod error;
pub mod generator;
pub mod graph;
pub mod harness;
pub mod inference;
pub mod metrics;
pub mod probing;
pub mod rank;
pub mod topics;

pub use error::{Error, Result};
