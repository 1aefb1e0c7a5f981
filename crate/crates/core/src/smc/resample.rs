use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ParticleCloud;
use crate::rng::SmcRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleScheme {
    /// i.i.d. categorical draws; the scheme the recycling estimators assume.
    #[default]
    Multinomial,
    /// One uniform offset, evenly spaced pointers. Lower variance, but not
    /// i.i.d., so keep it out of recycling experiments.
    Systematic,
}

fn cumulative(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = log_weights
        .iter()
        .map(|w| {
            acc += (w - max).exp();
            acc
        })
        .collect();
    for c in cdf.iter_mut() {
        *c /= acc;
    }
    cdf
}

fn locate(cdf: &[f64], u: f64) -> usize {
    // first index with cdf > u; zero-weight entries are never selected
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Ancestor indices for `n` offspring drawn from `log_weights`.
pub fn resample_indices(
    rng: &mut SmcRng,
    log_weights: &[f64],
    n: usize,
    scheme: ResampleScheme,
) -> Vec<usize> {
    let cdf = cumulative(log_weights);
    match scheme {
        ResampleScheme::Multinomial => (0..n).map(|_| locate(&cdf, rng.random::<f64>())).collect(),
        ResampleScheme::Systematic => {
            let u0: f64 = rng.random();
            (0..n).map(|i| locate(&cdf, (i as f64 + u0) / n as f64)).collect()
        }
    }
}

/// Copies particles (positions and cached log-likelihoods) along `indices`
/// and resets the weights to uniform.
pub fn select(cloud: &ParticleCloud, indices: &[usize]) -> ParticleCloud {
    let n = indices.len();
    ParticleCloud {
        positions: indices.iter().map(|&i| cloud.positions[i].clone()).collect(),
        log_weights: vec![-(n as f64).ln(); n],
        log_likelihoods: indices.iter().map(|&i| cloud.log_likelihoods[i]).collect(),
        phi: cloud.phi,
        iteration: cloud.iteration,
    }
}

/// `N` i.i.d. draws with replacement from the weighted cloud; uniform output weights.
pub fn resample_multinomial(rng: &mut SmcRng, cloud: &ParticleCloud) -> ParticleCloud {
    let idx = resample_indices(rng, &cloud.log_weights, cloud.len(), ResampleScheme::Multinomial);
    select(cloud, &idx)
}
