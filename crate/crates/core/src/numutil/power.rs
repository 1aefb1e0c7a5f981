use nalgebra::Cholesky;

use super::gaussian::{cholesky_jittered, Gaussian};
use crate::error::{Error, Result};

/// `log ∫ f1(x)^α f2(x)^(1-α) dx` for Gaussian `f1`, `f2`.
///
/// With `S = α Σ2 + (1-α) Σ1` the integral equals
/// `|Σ1|^((1-α)/2) |Σ2|^(α/2) |S|^(-1/2) exp(-α(1-α)/2 · Δμᵀ S⁻¹ Δμ)`.
/// It is finite iff `α Σ1⁻¹ + (1-α) Σ2⁻¹` is positive definite, which for
/// positive-definite `Σ1`, `Σ2` holds exactly when `S` is positive definite;
/// `S` is checked with an unjittered Cholesky factorization.
pub fn log_gaussian_power_integral(f1: &Gaussian, f2: &Gaussian, alpha: f64) -> Result<f64> {
    if f1.dim() != f2.dim() {
        return Err(Error::usage("Gaussians have different dimensions"));
    }
    if !alpha.is_finite() {
        return Err(Error::usage("alpha must be finite"));
    }
    let c1 = cholesky_jittered(&f1.cov)?.factor;
    let c2 = cholesky_jittered(&f2.cov)?.factor;
    let mixed = &f2.cov * alpha + &f1.cov * (1.0 - alpha);
    let cs = Cholesky::new(mixed).ok_or_else(|| {
        Error::domain(format!(
            "alpha*Sigma2 + (1-alpha)*Sigma1 is not positive definite (alpha = {alpha}); \
             the integral diverges"
        ))
    })?;
    let log_det = |c: &Cholesky<f64, nalgebra::Dyn>| {
        2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    };
    let diff = &f1.mean - &f2.mean;
    let solved = cs.solve(&diff);
    let quad = diff.dot(&solved);
    Ok(0.5 * (1.0 - alpha) * log_det(&c1) + 0.5 * alpha * log_det(&c2)
        - 0.5 * log_det(&cs)
        - 0.5 * alpha * (1.0 - alpha) * quad)
}

/// `∫ f1(x)^α f2(x)^(1-α) dx` for Gaussian `f1`, `f2`.
pub fn gaussian_power_integral(f1: &Gaussian, f2: &Gaussian, alpha: f64) -> Result<f64> {
    log_gaussian_power_integral(f1, f2, alpha).map(f64::exp)
}
