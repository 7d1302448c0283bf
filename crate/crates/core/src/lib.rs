//! Root-cause pathway tracing over structural causal models.
//!
//! The crate fits per-node causal mechanisms on observational data
//! (`scm`), scores node-level anomalies (`scoring`), attributes an
//! anomalous target to upstream noise via Shapley values
//! (`attribution`), and traces threshold-gated causal pathways from the
//! target back to its triggers (`pathfinder`). A synthetic retail
//! generator (`datagen`), a scheduled anomaly injector (`inject`) and an
//! IQR date detector (`detect`) reproduce the experiment end to end;
//! `pipeline` wires the stages together.

pub mod attribution;
pub mod dataset;
pub mod datagen;
pub mod detect;
pub mod graph;
pub mod inject;
pub mod pathfinder;
pub mod pipeline;
pub mod scm;
pub mod scoring;
mod seed;

pub use dataset::Dataset;
pub use graph::Dag;
pub use scm::{FitConfig, FittedScm, NoiseMatrix};
