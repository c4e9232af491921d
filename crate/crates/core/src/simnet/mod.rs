//! Deterministic network simulator.
//!
//! A scenario names a topology, the sessions to run over it and an optional
//! adversary that records, corrupts, replays, delays or drops packets. The
//! engine drives the real protocol code and reports per-flow outcomes plus
//! four invariants: key confinement, node statelessness, length invariance
//! and cross-link unlinkability.

pub mod anonset;
pub mod bench;
pub mod engine;
pub mod report;
pub mod scenario;
pub mod topology;

pub use anonset::{anonymity_set_size, AnonymitySet};
pub use bench::{run_bench, BenchReport};
pub use engine::run_scenario;
pub use report::TranscriptReport;
pub use scenario::Scenario;
pub use topology::{Topology, TopologySpec};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("protocol error: {0}")]
    Protocol(#[from] crate::Error),
}

impl SimError {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}
