//! The tempered SMC sampler: reweight, resample when the ESS drops, mutate.

mod cloud;
mod resample;
mod trace;
mod weights;

pub use cloud::ParticleCloud;
pub use resample::{resample_indices, resample_multinomial, select, ResampleScheme};
pub use trace::{log_evidence, posterior_expectation, RunTrace, TraceHeader};
pub use weights::{cess, ess, incremental_logweights};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{for_each_mut, map_indexed, Execution};
use crate::kernels::{KernelConfig, KernelState};
use crate::models::{sanitize, TemperedModel};
use crate::numutil::normalize_log_weights;
use crate::rng::{stream, StreamTag};
use crate::schedule::{cess_next_phi, CoolingSchedule, ScheduleStrategy};

/// How the temperatures are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Tempering {
    /// A schedule fixed before the run.
    Fixed { schedule: CoolingSchedule },
    /// Each next temperature solves `CESS = target·N` on the current cloud.
    Cess { target: f64, max_iters: usize },
}

/// Parameters of one sampler run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmcConfig {
    pub n_particles: usize,
    /// Resample when `ESS < ess_threshold · N`. `1.0` resamples at every
    /// step whose weights are not exactly uniform.
    pub ess_threshold: f64,
    pub tempering: Tempering,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub resampling: ResampleScheme,
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

impl SmcConfig {
    /// Fixed schedule, ESS threshold `N/2`, multinomial resampling.
    pub fn new(n_particles: usize, schedule: CoolingSchedule, kernel: KernelConfig, seed: u64) -> Self {
        Self {
            n_particles,
            ess_threshold: 0.5,
            tempering: Tempering::Fixed { schedule },
            kernel,
            resampling: ResampleScheme::Multinomial,
            seed,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::usage("at least two particles are required"));
        }
        if !(self.ess_threshold > 0.0 && self.ess_threshold <= 1.0) {
            return Err(Error::usage(format!(
                "ESS threshold fraction must lie in (0, 1], got {}",
                self.ess_threshold
            )));
        }
        if let Tempering::Cess { target, max_iters } = self.tempering {
            if !(target > 0.0 && target <= 1.0) {
                return Err(Error::usage(format!("CESS target fraction must lie in (0, 1], got {target}")));
            }
            if max_iters < 2 {
                return Err(Error::usage("CESS tempering needs max_iters >= 2"));
            }
        }
        Ok(())
    }
}

struct Particle {
    theta: Vec<f64>,
    ll: f64,
    accepted: Vec<u32>,
}

/// Runs the sampler. Cloud 0 is an exact prior draw; every later cloud is
/// stored after its mutation step.
pub fn smc_run<M: TemperedModel + ?Sized>(model: &M, cfg: &SmcConfig) -> Result<RunTrace> {
    cfg.validate()?;
    let n = cfg.n_particles;
    let exec = cfg.execution;
    let seed = cfg.seed;
    let fixed = match &cfg.tempering {
        Tempering::Fixed { schedule } => Some(schedule.phis()),
        Tempering::Cess { .. } => None,
    };

    let init: Vec<(Vec<f64>, f64)> = map_indexed(exec, n, |i| {
        let mut rng = stream(seed, StreamTag::Init, 0, i);
        let theta = model.sample_prior(&mut rng);
        let ll = sanitize(model.log_likelihood(&theta));
        (theta, ll)
    });
    let (positions, log_likelihoods) = init.into_iter().unzip();
    let mut clouds = vec![ParticleCloud {
        positions,
        log_weights: vec![-(n as f64).ln(); n],
        log_likelihoods,
        phi: 0.0,
        iteration: 0,
    }];
    let mut resampled = vec![false];
    let mut increments = Vec::new();
    let mut acceptance = vec![Vec::new()];
    let mut kernel = KernelState::new(model, &cfg.kernel)?;

    for t in 1.. {
        let prev = clouds.last().expect("at least one cloud");
        let phi = match (fixed, &cfg.tempering) {
            (Some(phis), _) => match phis.get(t) {
                Some(&p) => p,
                None => break,
            },
            (None, Tempering::Cess { target, max_iters }) => {
                if prev.phi >= 1.0 {
                    break;
                }
                if t >= *max_iters {
                    return Err(Error::Aborted {
                        iteration: t,
                        reason: format!("temperature {} after {max_iters} iterations", prev.phi),
                    });
                }
                cess_next_phi(prev, target * n as f64)?
            }
            _ => unreachable!(),
        };

        let inc = incremental_logweights(prev, phi);
        let mut log_w: Vec<f64> = prev.log_weights.iter().zip(&inc).map(|(a, b)| a + b).collect();
        let log_inc = normalize_log_weights(&mut log_w).map_err(|_| Error::Aborted {
            iteration: t,
            reason: format!("every particle weight vanished at phi = {phi}"),
        })?;
        increments.push(log_inc);

        let reweighted = ParticleCloud {
            positions: prev.positions.clone(),
            log_weights: log_w,
            log_likelihoods: prev.log_likelihoods.clone(),
            phi,
            iteration: t,
        };
        let do_resample = ess(&reweighted.log_weights) < cfg.ess_threshold * n as f64;
        let mut next = if do_resample {
            let mut rng = stream(seed, StreamTag::Resample, t, 0);
            let idx = resample_indices(&mut rng, &reweighted.log_weights, n, cfg.resampling);
            select(&reweighted, &idx)
        } else {
            reweighted
        };
        resampled.push(do_resample);

        kernel.prepare(model, prev, phi)?;
        let blocks = kernel.n_blocks();
        let mut particles: Vec<Particle> = next
            .positions
            .drain(..)
            .zip(&next.log_likelihoods)
            .map(|(theta, &ll)| Particle {
                theta,
                ll,
                accepted: vec![0; blocks],
            })
            .collect();
        let k = &kernel;
        for_each_mut(exec, &mut particles, |i, p| {
            let mut rng = stream(seed, StreamTag::Mutate, t, i);
            k.mutate(model, &mut rng, &mut p.theta, &mut p.ll, phi, &mut p.accepted);
        });
        let mut counts = vec![0u64; blocks];
        for p in &particles {
            for (c, a) in counts.iter_mut().zip(&p.accepted) {
                *c += u64::from(*a);
            }
        }
        acceptance.push(kernel.record(&counts, n));
        next.log_likelihoods = particles.iter().map(|p| p.ll).collect();
        next.positions = particles.into_iter().map(|p| p.theta).collect();
        clouds.push(next);
    }

    let phis: Vec<f64> = clouds.iter().map(|c| c.phi).collect();
    let schedule = match &cfg.tempering {
        Tempering::Fixed { schedule } => schedule.clone(),
        Tempering::Cess { target, .. } => {
            CoolingSchedule::new(phis, ScheduleStrategy::Cess { target: *target })?
        }
    };
    Ok(RunTrace {
        header: TraceHeader {
            n_particles: n,
            n_iterations: clouds.len(),
            dim: model.dim(),
            seed,
        },
        schedule,
        clouds,
        resampled,
        log_z_increments: increments,
        acceptance_rates: acceptance,
        warnings: kernel.take_warnings(),
    })
}
