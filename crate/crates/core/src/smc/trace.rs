use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ParticleCloud;
use crate::error::{Error, Result};
use crate::schedule::CoolingSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub n_particles: usize,
    pub n_iterations: usize,
    pub dim: usize,
    pub seed: u64,
}

/// Everything a run produced, in iteration order.
///
/// The JSON layout is `{header, schedule, clouds: [...], resampled,
/// log_z_increments, acceptance_rates, warnings}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub header: TraceHeader,
    pub schedule: CoolingSchedule,
    /// Post-mutation clouds; `clouds[0]` is the prior sample.
    pub clouds: Vec<ParticleCloud>,
    /// Whether iteration `t` resampled before mutating. Always false at 0.
    pub resampled: Vec<bool>,
    /// `log Σ W_{t-1} w_t` for `t = 1..T-1`.
    pub log_z_increments: Vec<f64>,
    /// Per-iteration, per-block acceptance rates (empty at 0 and for kernels
    /// without accept/reject).
    pub acceptance_rates: Vec<Vec<f64>>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.clouds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clouds.is_empty()
    }

    pub fn final_cloud(&self) -> &ParticleCloud {
        self.clouds.last().expect("a trace holds at least one cloud")
    }

    pub fn log_evidence(&self) -> f64 {
        log_evidence(self)
    }

    /// `log Ẑ_t` for every iteration, starting from `log Ẑ_0 = 0`.
    pub fn cumulative_log_evidence(&self) -> Vec<f64> {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(self.log_z_increments.iter().map(|v| {
                acc += v;
                acc
            }))
            .collect()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let trace: Self = serde_json::from_reader(file)?;
        trace.check()?;
        Ok(trace)
    }

    fn check(&self) -> Result<()> {
        let t = self.clouds.len();
        if t == 0
            || self.resampled.len() != t
            || self.log_z_increments.len() + 1 != t
            || self.header.n_iterations != t
        {
            return Err(Error::usage("trace lengths are inconsistent"));
        }
        Ok(())
    }
}

/// `Σ_t log Σ_m W_{t-1} w_t`, the log of the evidence estimate.
pub fn log_evidence(trace: &RunTrace) -> f64 {
    trace.log_z_increments.iter().sum()
}

/// `Σ_m W_T f(θ_T)` over the final cloud only.
pub fn posterior_expectation<F>(trace: &RunTrace, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    trace.final_cloud().expectation(f)
}
