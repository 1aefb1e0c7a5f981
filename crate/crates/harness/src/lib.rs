//! Benchmark harness for `smc-anneal`: experiment configs, seeded
//! replicate runs, reference posteriors and metric tables.

pub mod config;
pub mod emit;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod truth;

pub use config::{ExperimentConfig, GridSpec, ModelSpec, StrategySpec, TruthSpec};
pub use error::{HarnessError, Result};
pub use experiment::{build_reference, run_experiment, run_with_reference, ExperimentResult, Reference};
pub use metrics::{summarize, ReplicateRow, SummaryRow};
pub use truth::{grid_marginal_cdf, ks_distance, GridCdf};
