use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gaussian::Gaussian;
use super::{logsumexp_unchecked, normalize_log_weights};
use crate::error::{Error, Result};

/// Points with normalized log-weights (log-sum-exp equal to zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub points: Vec<Vec<f64>>,
    pub log_weights: Vec<f64>,
}

impl WeightedSample {
    /// Normalizes `log_weights` on construction.
    pub fn new(points: Vec<Vec<f64>>, mut log_weights: Vec<f64>) -> Result<Self> {
        if points.len() != log_weights.len() {
            return Err(Error::usage(format!(
                "{} points but {} weights",
                points.len(),
                log_weights.len()
            )));
        }
        if points.is_empty() {
            return Err(Error::usage("empty weighted sample"));
        }
        normalize_log_weights(&mut log_weights)?;
        Ok(Self { points, log_weights })
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// Self-normalized expectation of a vector-valued function.
    pub fn expectation<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let mut acc: Option<Vec<f64>> = None;
        for (p, lw) in self.points.iter().zip(&self.log_weights) {
            let w = lw.exp();
            let v = f(p);
            let a = acc.get_or_insert_with(|| vec![0.0; v.len()]);
            for (ai, vi) in a.iter_mut().zip(&v) {
                if w > 0.0 {
                    *ai += w * vi;
                }
            }
        }
        acc.unwrap_or_default()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.expectation(|p| p.to_vec())
    }

    /// Inverse sum of squared normalized weights.
    pub fn ess(&self) -> f64 {
        let log_sq = logsumexp_unchecked(self.log_weights.iter().map(|w| 2.0 * w));
        (-log_sq).exp()
    }
}

/// Weighted mean and covariance, with a flag for a singular covariance.
#[derive(Debug, Clone)]
pub struct Moments {
    pub gaussian: Gaussian,
    pub rank_deficient: bool,
}

/// Weighted moments `mean = Σ W θ`, `cov = Σ W (θ-mean)(θ-mean)^T` of a
/// normalized weighted sample.
pub fn weighted_moments(ws: &WeightedSample) -> Moments {
    let items = ws
        .points
        .iter()
        .zip(&ws.log_weights)
        .map(|(p, lw)| (lw.exp(), p.as_slice()));
    weighted_moments_iter(ws.dim(), items)
}

/// Weighted moments over `(weight, point)` pairs; weights must sum to one.
/// Two passes over the data (mean first) for accuracy.
pub fn weighted_moments_iter<'a, I>(dim: usize, items: I) -> Moments
where
    I: Iterator<Item = (f64, &'a [f64])> + Clone,
{
    let mut mean = DVector::zeros(dim);
    for (w, p) in items.clone() {
        if w > 0.0 {
            for i in 0..dim {
                mean[i] += w * p[i];
            }
        }
    }
    let mut cov = DMatrix::zeros(dim, dim);
    let mut diff = vec![0.0; dim];
    for (w, p) in items {
        if w <= 0.0 {
            continue;
        }
        for i in 0..dim {
            diff[i] = p[i] - mean[i];
        }
        for i in 0..dim {
            for j in 0..=i {
                cov[(i, j)] += w * diff[i] * diff[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    let rank_deficient = Cholesky::new(cov.clone()).is_none();
    Moments {
        gaussian: Gaussian::new_unchecked(mean, cov),
        rank_deficient,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_pair() {
        let ws = WeightedSample::uniform(vec![vec![-1.0], vec![1.0]]).unwrap();
        let m = weighted_moments(&ws);
        assert!(m.gaussian.mean[0].abs() < 1e-15);
        assert!((m.gaussian.cov[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(!m.rank_deficient);
    }

    #[test]
    fn degenerate_weight_selects_first_point() {
        let ws = WeightedSample::new(
            vec![vec![2.0, 3.0], vec![5.0, -1.0]],
            vec![0.0, f64::NEG_INFINITY],
        )
        .unwrap();
        let m = weighted_moments(&ws);
        assert_eq!(m.gaussian.mean.as_slice(), &[2.0, 3.0]);
        assert_eq!(m.gaussian.cov.amax(), 0.0);
        assert!(m.rank_deficient);
    }

    #[test]
    fn identical_points_flag_rank_deficiency() {
        let ws = WeightedSample::uniform(vec![vec![1.0, 1.0]; 4]).unwrap();
        assert!(weighted_moments(&ws).rank_deficient);
    }

    #[test]
    fn five_unequal_points_against_direct_sums() {
        let pts = [
            [0.5, 1.0],
            [-1.5, 2.0],
            [2.0, 0.0],
            [0.0, -1.0],
            [3.0, 3.0],
        ];
        let w = [0.1, 0.3, 0.2, 0.15, 0.25];
        let ws = WeightedSample::new(
            pts.iter().map(|p| p.to_vec()).collect(),
            w.iter().map(|x: &f64| x.ln()).collect(),
        )
        .unwrap();
        let m = weighted_moments(&ws);
        let mx: f64 = (0..5).map(|i| w[i] * pts[i][0]).sum();
        let my: f64 = (0..5).map(|i| w[i] * pts[i][1]).sum();
        let cxy: f64 = (0..5).map(|i| w[i] * (pts[i][0] - mx) * (pts[i][1] - my)).sum();
        let cxx: f64 = (0..5).map(|i| w[i] * (pts[i][0] - mx).powi(2)).sum();
        assert!((m.gaussian.mean[0] - mx).abs() < 1e-14);
        assert!((m.gaussian.mean[1] - my).abs() < 1e-14);
        assert!((m.gaussian.cov[(0, 1)] - cxy).abs() < 1e-14);
        assert!((m.gaussian.cov[(0, 0)] - cxx).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn uniform_weights_equal_plain_moments(
            pts in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 2..30)
        ) {
            let n = pts.len() as f64;
            let ws = WeightedSample::uniform(pts.clone()).unwrap();
            let m = weighted_moments(&ws);
            for i in 0..3 {
                let mean_i: f64 = pts.iter().map(|p| p[i]).sum::<f64>() / n;
                prop_assert!((m.gaussian.mean[i] - mean_i).abs() < 1e-12);
                for j in 0..3 {
                    let mean_j: f64 = pts.iter().map(|p| p[j]).sum::<f64>() / n;
                    let c: f64 = pts.iter().map(|p| (p[i] - mean_i) * (p[j] - mean_j)).sum::<f64>() / n;
                    prop_assert!((m.gaussian.cov[(i, j)] - c).abs() < 1e-12);
                }
            }
        }
    }
}
