use serde::{Deserialize, Serialize};

use super::UniformizedHistory;
use crate::error::{Error, Result};
use crate::numutil::{logsumexp_unchecked, WeightedSample};

/// How collections are mixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// Proportional to each collection's total correction weight.
    Naive,
    /// Proportional to each collection's effective sample size.
    Optimal,
}

/// Log importance weights `(1 − φ_t) log p(y|θ)` taking collection `t` to
/// the posterior. Exactly zero at `φ_t = 1`.
pub fn ess_correction_weights(hist: &UniformizedHistory, t: usize) -> Vec<f64> {
    let gap = 1.0 - hist.phis[t];
    hist.log_likelihoods[t]
        .iter()
        .map(|&ll| if gap == 0.0 { 0.0 } else { crate::models::sanitize(gap * ll) })
        .collect()
}

fn normalize_scores(log_scores: Vec<f64>) -> Result<Vec<f64>> {
    let total = logsumexp_unchecked(log_scores.iter().copied());
    if !total.is_finite() {
        return Err(Error::domain("every recycled collection has zero weight"));
    }
    Ok(log_scores.iter().map(|s| (s - total).exp()).collect())
}

/// `λ_t = W_t / Σ W_n`, where `W_t` sums collection `t`'s correction weights.
pub fn lambda_naive(log_weights: &[Vec<f64>]) -> Result<Vec<f64>> {
    normalize_scores(
        log_weights
            .iter()
            .map(|w| logsumexp_unchecked(w.iter().copied()))
            .collect(),
    )
}

/// `λ_t ∝ (Σ w)² / Σ w²`, each collection's ESS. Zero for a collection
/// without mass.
pub fn lambda_optimal(log_weights: &[Vec<f64>]) -> Result<Vec<f64>> {
    normalize_scores(
        log_weights
            .iter()
            .map(|w| {
                let first = logsumexp_unchecked(w.iter().copied());
                if first == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                2.0 * first - logsumexp_unchecked(w.iter().map(|v| 2.0 * v))
            })
            .collect(),
    )
}

/// The pooled sample `Σ_t λ_t Σ_i W̄_{t,i} δ_{θ_{t,i}}` over `omega`, with
/// `W̄` self-normalized within each collection; also returns `λ`.
pub fn recycled_sample_ess(
    hist: &UniformizedHistory,
    rule: LambdaRule,
    omega: &[usize],
) -> Result<(WeightedSample, Vec<f64>)> {
    hist.check_omega(omega)?;
    let weights: Vec<Vec<f64>> = omega.iter().map(|&t| ess_correction_weights(hist, t)).collect();
    let lambda = match rule {
        LambdaRule::Naive => lambda_naive(&weights)?,
        LambdaRule::Optimal => lambda_optimal(&weights)?,
    };
    let mut points = Vec::new();
    let mut log_w = Vec::new();
    for ((&t, w), &l) in omega.iter().zip(&weights).zip(&lambda) {
        if l == 0.0 {
            continue;
        }
        let total = logsumexp_unchecked(w.iter().copied());
        for (p, lw) in hist.points[t].iter().zip(w) {
            points.push(p.clone());
            log_w.push(l.ln() + lw - total);
        }
    }
    Ok((WeightedSample::new(points, log_w)?, lambda))
}

/// `Σ_t λ_t ĥ_t` for a vector-valued `f`.
pub fn recycled_estimate_ess<F>(
    hist: &UniformizedHistory,
    f: F,
    rule: LambdaRule,
    omega: &[usize],
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    Ok(recycled_sample_ess(hist, rule, omega)?.0.expectation(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln(v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| x.ln()).collect()
    }

    #[test]
    fn naive_lambda_examples() {
        let l = lambda_naive(&[ln(&[1.0, 2.0]), ln(&[0.5, 0.5])]).unwrap();
        assert!((l[0] - 0.75).abs() < 1e-12 && (l[1] - 0.25).abs() < 1e-12);
        let l = lambda_naive(&[ln(&[1.0, 1.0]), ln(&[0.0, 0.0]), ln(&[1.0, 1.0])]).unwrap();
        assert_eq!(l[1], 0.0);
        assert!((l[0] - 0.5).abs() < 1e-12);
        assert!(lambda_naive(&[ln(&[0.0])]).is_err());
    }

    #[test]
    fn optimal_lambda_examples() {
        let l = lambda_optimal(&[ln(&[1.0, 1.0]), ln(&[1.0, 0.0])]).unwrap();
        assert!((l[0] - 2.0 / 3.0).abs() < 1e-12 && (l[1] - 1.0 / 3.0).abs() < 1e-12);
        let l = lambda_optimal(&[vec![0.0; 3], vec![5.0; 6]]).unwrap();
        assert!((l[0] - 1.0 / 3.0).abs() < 1e-12);
        let l = lambda_optimal(&[ln(&[1e-300, 1.0, 1e-300, 1e-300]), vec![0.0; 4]]).unwrap();
        assert!((l[0] - 1.0 / 5.0).abs() < 1e-9);
    }

    fn history() -> UniformizedHistory {
        UniformizedHistory {
            points: vec![vec![vec![1.0], vec![2.0]], vec![vec![3.0], vec![5.0]], vec![vec![4.0], vec![6.0]]],
            log_likelihoods: vec![vec![-1.0, -2.0], vec![-0.5, -3.0], vec![-1.5, -0.1]],
            phis: vec![0.0, 0.5, 1.0],
            log_z: vec![0.0, -0.7, -1.2],
            proportions: vec![1.0 / 3.0; 3],
            reused: vec![true; 3],
        }
    }

    #[test]
    fn correction_weights_at_the_ends() {
        let h = history();
        assert_eq!(ess_correction_weights(&h, 2), vec![0.0, 0.0]);
        assert_eq!(ess_correction_weights(&h, 0), vec![-1.0, -2.0]);
    }

    #[test]
    fn estimate_is_a_convex_combination() {
        let h = history();
        for rule in [LambdaRule::Naive, LambdaRule::Optimal] {
            let c = recycled_estimate_ess(&h, |_| vec![2.5], rule, &h.all()).unwrap();
            assert!((c[0] - 2.5).abs() < 1e-12);
            let last = recycled_estimate_ess(&h, |p| p.to_vec(), rule, &[2]).unwrap();
            assert!((last[0] - 5.0).abs() < 1e-12);
            let (_, lambda) = recycled_sample_ess(&h, rule, &h.all()).unwrap();
            assert!((lambda.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(lambda.iter().all(|&l| l >= 0.0));
        }
        // by hand for the naive rule
        let w0: Vec<f64> = [-1.0f64, -2.0].iter().map(|v| v.exp()).collect();
        let w1: Vec<f64> = [-0.25f64, -1.5].iter().map(|v| v.exp()).collect();
        let (s0, s1, s2) = (w0[0] + w0[1], w1[0] + w1[1], 2.0);
        let h0 = (w0[0] * 1.0 + w0[1] * 2.0) / s0;
        let h1 = (w1[0] * 3.0 + w1[1] * 5.0) / s1;
        let want = (s0 * h0 + s1 * h1 + s2 * 5.0) / (s0 + s1 + s2);
        let got = recycled_estimate_ess(&h, |p| p.to_vec(), LambdaRule::Naive, &h.all()).unwrap();
        assert!((got[0] - want).abs() < 1e-12);
        assert!(recycled_estimate_ess(&h, |p| p.to_vec(), LambdaRule::Naive, &[]).is_err());
        assert!(recycled_estimate_ess(&h, |p| p.to_vec(), LambdaRule::Naive, &[3]).is_err());
    }
}
