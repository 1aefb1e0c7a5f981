use super::UniformizedHistory;
use crate::error::Result;
use crate::numutil::{logsumexp_unchecked, WeightedSample};

/// Deterministic-mixture log-weights
/// `log γ(θ) − log Σ_n c_n γ_n(θ) / Ẑ_n` for points given their target
/// log-density `log_gamma[i]` and component log-densities
/// `log_gamma_n[i][n]`. Points whose mixture density vanishes get `-inf`.
pub fn demix_log_weights(
    log_gamma: &[f64],
    log_gamma_n: &[Vec<f64>],
    proportions: &[f64],
    log_z: &[f64],
) -> Vec<f64> {
    let log_c: Vec<f64> = proportions.iter().map(|c| c.ln()).collect();
    log_gamma
        .iter()
        .zip(log_gamma_n)
        .map(|(&lg, comps)| {
            let denom = logsumexp_unchecked(
                comps
                    .iter()
                    .zip(&log_c)
                    .zip(log_z)
                    .map(|((g, c), z)| c + g - z),
            );
            if denom == f64::NEG_INFINITY || lg == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                crate::models::sanitize(lg - denom)
            }
        })
        .collect()
}

/// Pooled DeMix sample over `omega` and the number of zero-weight points.
/// The prior term cancels from numerator and denominator, so only cached
/// log-likelihoods are used.
pub fn demix_sample(hist: &UniformizedHistory, omega: &[usize]) -> Result<(WeightedSample, usize)> {
    hist.check_omega(omega)?;
    let total: f64 = omega.iter().map(|&t| hist.proportions[t]).sum();
    let props: Vec<f64> = omega.iter().map(|&t| hist.proportions[t] / total).collect();
    let log_z: Vec<f64> = omega.iter().map(|&t| hist.log_z[t]).collect();
    let phis: Vec<f64> = omega.iter().map(|&t| hist.phis[t]).collect();
    let mut points = Vec::new();
    let mut lls = Vec::new();
    for &t in omega {
        points.extend(hist.points[t].iter().cloned());
        lls.extend(hist.log_likelihoods[t].iter().copied());
    }
    let comps: Vec<Vec<f64>> = lls
        .iter()
        .map(|&ll| {
            phis.iter()
                .map(|&phi| if phi == 0.0 { 0.0 } else { crate::models::sanitize(phi * ll) })
                .collect()
        })
        .collect();
    let log_w = demix_log_weights(&lls, &comps, &props, &log_z);
    let zeros = log_w.iter().filter(|w| **w == f64::NEG_INFINITY).count();
    Ok((WeightedSample::new(points, log_w)?, zeros))
}

/// Self-normalized DeMix estimate of `E[f]` under the posterior.
pub fn demix_estimate<F>(hist: &UniformizedHistory, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    Ok(demix_sample(hist, &hist.all())?.0.expectation(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recycle::{recycled_estimate_ess, LambdaRule};

    #[test]
    fn common_shift_cancels() {
        let lg = vec![-1.0, -3.5, 0.2];
        let comps = vec![vec![-0.5, -1.0], vec![-2.0, -3.0], vec![0.0, 0.1]];
        let props = [0.4, 0.6];
        let log_z = [0.0, -0.3];
        let base = demix_log_weights(&lg, &comps, &props, &log_z);
        // γ_n → k γ_n for every n with Ẑ_n → k Ẑ_n, and γ → k γ
        let k = 17.25;
        let lg2: Vec<f64> = lg.iter().map(|v| v + k).collect();
        let comps2: Vec<Vec<f64>> = comps.iter().map(|r| r.iter().map(|v| v + k).collect()).collect();
        let z2: Vec<f64> = log_z.iter().map(|v| v + k).collect();
        let shifted = demix_log_weights(&lg2, &comps2, &props, &z2);
        // normalized weights agree
        let norm = |w: &[f64]| {
            let t = logsumexp_unchecked(w.iter().copied());
            w.iter().map(|v| v - t).collect::<Vec<_>>()
        };
        for (a, b) in norm(&base).iter().zip(norm(&shifted)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn identical_components_give_unit_weights() {
        let w = demix_log_weights(&[0.3, -2.0], &[vec![0.3, 0.3], vec![-2.0, -2.0]], &[0.5, 0.5], &[0.0, 0.0]);
        assert!(w.iter().all(|v| v.abs() < 1e-12));
        let w = demix_log_weights(&[0.0], &[vec![f64::NEG_INFINITY]], &[1.0], &[0.0]);
        assert_eq!(w[0], f64::NEG_INFINITY);
    }

    #[test]
    fn single_collection_matches_ess_estimator() {
        let hist = UniformizedHistory {
            points: vec![vec![vec![1.0], vec![2.0], vec![4.0]]],
            log_likelihoods: vec![vec![-1.0, -0.2, -3.0]],
            phis: vec![0.0],
            log_z: vec![0.0],
            proportions: vec![1.0],
            reused: vec![true],
        };
        let a = demix_estimate(&hist, |p| p.to_vec()).unwrap();
        let b = recycled_estimate_ess(&hist, |p| p.to_vec(), LambdaRule::Optimal, &[0]).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-12);
    }
}
