//! Dense numeric primitives shared by every other module.

mod gaussian;
mod moments;
mod nelder_mead;
mod power;

pub use gaussian::{
    cholesky_jittered, mvn_logpdf, mvn_sample, Gaussian, GaussianFactor, JitteredCholesky,
};
pub use moments::{weighted_moments, weighted_moments_iter, Moments, WeightedSample};
pub use nelder_mead::{nelder_mead, nelder_mead_with, NelderMeadOptions, NelderMeadResult};
pub use power::{gaussian_power_integral, log_gaussian_power_integral};
pub(crate) use gaussian::{matrix_to_rows, rows_to_matrix};

use crate::error::{Error, Result};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Numerically stable `log(sum(exp(values)))`.
///
/// All-`-inf` input returns `-inf`. Any `+inf` entry returns `+inf`.
pub fn logsumexp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::usage("logsumexp of an empty list"));
    }
    Ok(logsumexp_unchecked(values.iter().copied()))
}

/// Log-sum-exp over an iterator; returns `-inf` when empty.
pub(crate) fn logsumexp_unchecked<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64> + Clone,
{
    let max = values
        .clone()
        .into_iter()
        .fold(f64::NEG_INFINITY, |m, v| if v > m { v } else { m });
    if max.is_infinite() {
        return max;
    }
    let sum: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Normalizes log-weights in place so that they log-sum-exp to zero.
/// Returns the log of the original total.
pub fn normalize_log_weights(log_weights: &mut [f64]) -> Result<f64> {
    let total = logsumexp(log_weights)?;
    if !total.is_finite() {
        return Err(Error::numeric(format!(
            "cannot normalize weights with log-total {total}"
        )));
    }
    for w in log_weights.iter_mut() {
        *w -= total;
    }
    Ok(total)
}
