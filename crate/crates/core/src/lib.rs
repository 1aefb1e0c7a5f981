//! Sequential Monte Carlo samplers for tempered posteriors, with adaptive
//! cooling schedules and estimators that recycle every stored particle cloud.

pub mod error;
pub mod exec;
pub mod kernels;
pub mod models;
pub mod numutil;
pub mod recycle;
pub mod rng;
pub mod schedule;
pub mod smc;

pub use error::{Error, Result};
pub use exec::Execution;
pub use models::{AnyModel, BlockPartition, TemperedModel};
pub use kernels::{KernelConfig, MwgSettings};
pub use schedule::{parametric_schedule, ApproxMethod, CoolingSchedule, GaussianSequence};
pub use smc::{smc_run, ParticleCloud, RunTrace, SmcConfig, Tempering};
