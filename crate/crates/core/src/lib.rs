//! Event-triggered, compressed distributed Nash equilibrium seeking.
//!
//! Agents on a directed network each control one player's action but keep an
//! estimate of the whole profile. Every iteration an agent compresses the
//! innovation between its estimate and a running reference, a trigger decides
//! whether to broadcast it, and the estimate moves by a consensus correction
//! plus a local gradient step.

pub mod compressors;
pub mod dynamics;
pub mod error;
pub mod games;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod theory;
pub mod triggers;

pub use error::{Error, Result};
