use super::ParticleCloud;
use crate::error::{Error, Result};
use crate::numutil::logsumexp_unchecked;

/// Effective sample size `1 / Σ W²` of normalized log-weights.
///
/// Unnormalized input is accepted: the result is `(Σ w)² / Σ w²`.
pub fn ess(log_weights: &[f64]) -> f64 {
    let total = logsumexp_unchecked(log_weights.iter().copied());
    let sq = logsumexp_unchecked(log_weights.iter().map(|w| 2.0 * w));
    (2.0 * total - sq).exp()
}

/// Conditional ESS `(Σ W w)² / (Σ W w² / N)` of the incremental weights `w`
/// given normalized previous weights `W`.
pub fn cess(prev_log_weights: &[f64], inc_log_weights: &[f64]) -> Result<f64> {
    if prev_log_weights.len() != inc_log_weights.len() || prev_log_weights.is_empty() {
        return Err(Error::usage("weight vectors must be non-empty and of equal length"));
    }
    let n = prev_log_weights.len() as f64;
    let pairs = || prev_log_weights.iter().zip(inc_log_weights);
    let first = logsumexp_unchecked(pairs().map(|(a, b)| a + b));
    if first == f64::NEG_INFINITY {
        return Err(Error::domain("every incremental weight is zero"));
    }
    let second = logsumexp_unchecked(pairs().map(|(a, b)| a + 2.0 * b));
    let total = logsumexp_unchecked(prev_log_weights.iter().copied());
    Ok(n * (2.0 * first - second - total).exp())
}

/// `(φ_next − φ_t) · log p(y | θ_t)` for every particle, from the cached
/// log-likelihoods. A zero step gives exact zeros.
pub fn incremental_logweights(cloud: &ParticleCloud, phi_next: f64) -> Vec<f64> {
    let dphi = phi_next - cloud.phi;
    cloud
        .log_likelihoods
        .iter()
        .map(|&ll| {
            if dphi == 0.0 {
                0.0
            } else {
                crate::models::sanitize(dphi * ll)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logs(w: &[f64]) -> Vec<f64> {
        w.iter().map(|v| v.ln()).collect()
    }

    #[test]
    fn ess_examples() {
        assert!((ess(&logs(&[0.5, 0.5])) - 2.0).abs() < 1e-12);
        assert!((ess(&logs(&[1.0, 0.0, 0.0])) - 1.0).abs() < 1e-12);
        assert!((ess(&logs(&[0.7, 0.2, 0.1])) - 1.0 / 0.54).abs() < 1e-12);
    }

    #[test]
    fn cess_examples() {
        let prev = logs(&[0.5, 0.5]);
        assert!((cess(&prev, &logs(&[1.0, 0.0])).unwrap() - 1.0).abs() < 1e-12);
        let prev = logs(&[0.1, 0.2, 0.3, 0.4]);
        assert!((cess(&prev, &[-2.0; 4]).unwrap() - 4.0).abs() < 1e-12);
        let inc = [0.3, -1.0, 2.0, -0.2];
        let shifted: Vec<f64> = inc.iter().map(|v| v + 7.5).collect();
        let a = cess(&prev, &inc).unwrap();
        assert!((a - cess(&prev, &shifted).unwrap()).abs() < 1e-12);
        assert!(a > 0.0 && a <= 4.0);
        assert!(cess(&prev, &[f64::NEG_INFINITY; 4]).is_err());
    }

    #[test]
    fn cess_matches_direct_sums() {
        let w = [0.1, 0.2, 0.3, 0.4];
        let inc = [1.5, 0.2, 3.0, 0.7];
        let num: f64 = w.iter().zip(&inc).map(|(a, b)| a * b).sum::<f64>().powi(2);
        let den: f64 = w.iter().zip(&inc).map(|(a, b)| a * b * b / 4.0).sum();
        let got = cess(&logs(&w), &logs(&inc)).unwrap();
        assert!((got - num / den).abs() < 1e-12);
    }

    fn cloud(ll: Vec<f64>, phi: f64) -> ParticleCloud {
        let n = ll.len();
        ParticleCloud {
            positions: vec![vec![0.0]; n],
            log_weights: vec![-(n as f64).ln(); n],
            log_likelihoods: ll,
            phi,
            iteration: 0,
        }
    }

    #[test]
    fn increments_are_linear_in_the_step() {
        let c = cloud(vec![-1.0, -4.0, f64::NEG_INFINITY], 0.2);
        assert_eq!(incremental_logweights(&c, 0.2), vec![0.0; 3]);
        let a = incremental_logweights(&c, 0.3);
        let b = incremental_logweights(&c, 0.4);
        assert!((b[0] - 2.0 * a[0]).abs() < 1e-15 && (b[1] - 2.0 * a[1]).abs() < 1e-15);
        assert_eq!(a[2], f64::NEG_INFINITY);
    }
}
