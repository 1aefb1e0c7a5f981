use serde::{Deserialize, Serialize};

use super::{parametric_schedule, CoolingSchedule, GaussianSequence};
use crate::error::{Error, Result};
use crate::numutil::{log_gaussian_power_integral, nelder_mead_with, Gaussian, NelderMeadOptions};

/// Asymptotic variance of the log-evidence estimator under perfect mixing,
/// `Σ_k (∫ π_{k+1}² / π_k − 1)`, with every `π` taken from `seq`.
pub fn asymptotic_variance(seq: &GaussianSequence, sched: &CoolingSchedule) -> Result<f64> {
    let phis = sched.phis();
    let mut prev: Option<(f64, Gaussian)> = None;
    let mut total = 0.0;
    for (k, &phi) in phis.iter().enumerate() {
        let g = match &prev {
            Some((p, g)) if *p == phi => g.clone(),
            _ => seq.intermediate(phi)?,
        };
        if let Some((p, before)) = &prev {
            if *p != phi {
                let log_i = log_gaussian_power_integral(&g, before, 2.0)
                    .map_err(|e| Error::domain(format!("step {k} (phi {p} -> {phi}): {e}")))?;
                total += log_i.exp_m1();
            }
        }
        prev = Some((phi, g));
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaOptimum {
    pub gamma: f64,
    pub variance: f64,
}

const GAMMA_BOUND: f64 = 30.0;
const STARTS: [f64; 5] = [-15.0, -5.0, 0.0, 5.0, 15.0];

fn objective(seq: &GaussianSequence, t: usize, gamma: f64) -> f64 {
    if !(gamma.abs() <= GAMMA_BOUND) {
        return f64::INFINITY;
    }
    parametric_schedule(gamma, t)
        .and_then(|s| asymptotic_variance(seq, &s))
        .unwrap_or(f64::INFINITY)
}

/// Minimizes the asymptotic variance over the parametric family with
/// `γ ∈ [−30, 30]`, keeping the best of five Nelder-Mead starts.
pub fn optimize_gamma(seq: &GaussianSequence, t: usize) -> Result<GammaOptimum> {
    if t < 2 {
        return Err(Error::usage("T must be at least 2"));
    }
    let opts = NelderMeadOptions {
        tol: 1e-12,
        xtol: 1e-7,
        max_iters: 500,
        step: 0.5,
    };
    let mut best: Option<GammaOptimum> = None;
    for start in STARTS {
        let Ok(r) = nelder_mead_with(|g| objective(seq, t, g[0]), &[start], opts) else {
            continue;
        };
        if r.min.is_finite() && best.is_none_or(|b| r.min < b.variance) {
            best = Some(GammaOptimum {
                gamma: r.argmin[0],
                variance: r.min,
            });
        }
    }
    best.ok_or_else(|| Error::domain("asymptotic variance is not finite for any gamma in [-30, 30]"))
}

/// The objective at each of `gammas` (`+inf` where undefined).
pub fn variance_profile(seq: &GaussianSequence, t: usize, gammas: &[f64]) -> Vec<(f64, f64)> {
    gammas.iter().map(|&g| (g, objective(seq, t, g))).collect()
}
