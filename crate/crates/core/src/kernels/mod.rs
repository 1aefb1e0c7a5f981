//! Mutation kernels that leave the current tempered target invariant.

mod mwg;
mod perfect;

pub use mwg::{adapt_covariances, mwg_sweep, MwgSettings, MwgState, SweepOutcome};
pub use perfect::perfect_gaussian_kernel;


use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::TemperedModel;
use crate::numutil::GaussianFactor;
use crate::rng::SmcRng;
use crate::smc::ParticleCloud;

/// Which kernel moves the particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelConfig {
    /// Adaptive random-walk Metropolis-within-Gibbs.
    Mwg(MwgSettings),
    /// Independent exact draws from the tempered target. Needs a model whose
    /// tempered targets are Gaussian in closed form.
    PerfectGaussian,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig::Mwg(MwgSettings::default())
    }
}

/// Per-run kernel state, updated between iterations and read-only while
/// particles are moved.
#[derive(Debug, Clone)]
pub enum KernelState {
    Mwg(MwgState),
    PerfectGaussian(Option<GaussianFactor>),
}

impl KernelState {
    pub fn new<M: TemperedModel + ?Sized>(model: &M, cfg: &KernelConfig) -> Result<Self> {
        match cfg {
            KernelConfig::Mwg(s) => Ok(KernelState::Mwg(MwgState::new(model, s.clone())?)),
            KernelConfig::PerfectGaussian => {
                if model.exact_tempered(1.0).is_none() {
                    return Err(Error::usage(
                        "the perfect-mixing kernel needs a model with Gaussian tempered targets",
                    ));
                }
                Ok(KernelState::PerfectGaussian(None))
            }
        }
    }

    /// Readies the kernel for the target at `phi`, given the previous stored cloud.
    pub fn prepare<M: TemperedModel + ?Sized>(
        &mut self,
        model: &M,
        prev: &ParticleCloud,
        phi: f64,
    ) -> Result<()> {
        match self {
            KernelState::Mwg(state) => adapt_covariances(prev, state),
            KernelState::PerfectGaussian(factor) => {
                let g = model
                    .exact_tempered(phi)
                    .ok_or_else(|| Error::usage(format!("no exact tempered target at phi = {phi}")))?;
                *factor = Some(GaussianFactor::new(&g)?);
                Ok(())
            }
        }
    }

    pub fn n_blocks(&self) -> usize {
        match self {
            KernelState::Mwg(s) => s.partition().len(),
            KernelState::PerfectGaussian(_) => 0,
        }
    }

    /// Moves one particle in place, updating its cached log-likelihood and
    /// adding per-block acceptance counts to `accepted`.
    pub fn mutate<M: TemperedModel + ?Sized>(
        &self,
        model: &M,
        rng: &mut SmcRng,
        theta: &mut Vec<f64>,
        ll: &mut f64,
        phi: f64,
        accepted: &mut [u32],
    ) {
        match self {
            KernelState::Mwg(state) => mwg::sweep_in_place(rng, model, theta, ll, phi, state, accepted),
            KernelState::PerfectGaussian(factor) => {
                let f = factor.as_ref().expect("prepare() runs before mutate()");
                *theta = f.sample(rng).as_slice().to_vec();
                *ll = crate::models::sanitize(model.log_likelihood(theta));
            }
        }
    }

    /// Records pooled acceptance counts of the last mutation step over
    /// `n_particles` particles; returns the per-block rates.
    pub fn record(&mut self, counts: &[u64], n_particles: usize) -> Vec<f64> {
        match self {
            KernelState::Mwg(state) => {
                let proposals = (n_particles * state.settings().n_mcmc) as f64;
                let rates: Vec<f64> = counts.iter().map(|&c| c as f64 / proposals).collect();
                state.set_acceptance_rates(rates.clone());
                rates
            }
            KernelState::PerfectGaussian(_) => Vec::new(),
        }
    }

    pub fn take_warnings(&mut self) -> Vec<String> {
        match self {
            KernelState::Mwg(state) => state.take_warnings(),
            KernelState::PerfectGaussian(_) => Vec::new(),
        }
    }
}
