use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::LN_2PI;
use crate::error::{Error, Result};

/// Multivariate normal N(mean, cov).
///
/// Serialized as `{"mean": [...], "cov": [[row], ...]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl Gaussian {
    /// Builds a Gaussian after checking shapes and symmetry (1e-10 relative).
    /// The stored covariance is exactly symmetrized.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::usage(format!(
                "covariance is {}x{} but mean has dimension {d}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        for i in 0..d {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::usage(format!(
                        "covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self::new_unchecked(mean, symmetrize(cov)))
    }

    pub(crate) fn new_unchecked(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn standard(d: usize) -> Self {
        Self::new_unchecked(DVector::zeros(d), DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn factor(&self) -> Result<GaussianFactor> {
        GaussianFactor::new(self)
    }

    /// Marginal over a contiguous coordinate range.
    pub fn marginal(&self, range: std::ops::Range<usize>) -> Gaussian {
        let k = range.len();
        Gaussian::new_unchecked(
            self.mean.rows(range.start, k).into_owned(),
            self.cov.view((range.start, range.start), (k, k)).into_owned(),
        )
    }
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Cholesky factor together with the diagonal jitter that was needed.
#[derive(Debug, Clone)]
pub struct JitteredCholesky {
    pub factor: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

/// Cholesky with escalating diagonal jitter.
///
/// On failure adds `1e-10 * trace/d * I`, then ×10, ×100 (three retries).
pub fn cholesky_jittered(m: &DMatrix<f64>) -> Result<JitteredCholesky> {
    if let Some(factor) = Cholesky::new(m.clone()) {
        return Ok(JitteredCholesky { factor, jitter: 0.0 });
    }
    let d = m.nrows().max(1);
    let base = 1e-10 * m.trace() / d as f64;
    if !(base.is_finite() && base > 0.0) {
        return Err(Error::numeric(format!(
            "matrix is not positive definite (trace {})",
            m.trace()
        )));
    }
    let mut jitter = base;
    for _ in 0..3 {
        let mut shifted = m.clone();
        for i in 0..m.nrows() {
            shifted[(i, i)] += jitter;
        }
        if let Some(factor) = Cholesky::new(shifted) {
            return Ok(JitteredCholesky { factor, jitter });
        }
        jitter *= 10.0;
    }
    Err(Error::numeric(
        "matrix is not positive definite after jitter".to_string(),
    ))
}

/// A Gaussian with its Cholesky factor precomputed, for repeated
/// density evaluation and sampling.
#[derive(Debug, Clone)]
pub struct GaussianFactor {
    mean: DVector<f64>,
    lower: DMatrix<f64>,
    log_det: f64,
    jitter: f64,
}

impl GaussianFactor {
    pub fn new(g: &Gaussian) -> Result<Self> {
        let chol = cholesky_jittered(&g.cov)?;
        let lower = chol.factor.l();
        let log_det = 2.0 * lower.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            mean: g.mean.clone(),
            lower,
            log_det,
            jitter: chol.jitter,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Squared Mahalanobis distance of `x` from the mean.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        // forward substitution on L z = x - mu
        let mut z = vec![0.0; d];
        for i in 0..d {
            let mut s = x[i] - self.mean[i];
            for (j, zj) in z.iter().enumerate().take(i) {
                s -= self.lower[(i, j)] * zj;
            }
            z[i] = s / self.lower[(i, i)];
        }
        z.iter().map(|v| v * v).sum()
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let v = -0.5 * (self.mahalanobis_sq(x) + self.dim() as f64 * LN_2PI + self.log_det);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    /// Draws `mean + L z` with `z` i.i.d. standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let mut out = self.mean.clone();
        self.add_noise(rng, out.as_mut_slice());
        out
    }

    /// Adds `L z` to `x` in place (a zero-mean draw with this covariance).
    pub fn add_noise<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64]) {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..d {
            let mut s = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                s += self.lower[(i, j)] * zj;
            }
            x[i] += s;
        }
    }
}

/// Exact log N(x | mean, cov) via Cholesky.
pub fn mvn_logpdf(x: &[f64], g: &Gaussian) -> Result<f64> {
    if x.len() != g.dim() {
        return Err(Error::usage(format!(
            "point has dimension {} but Gaussian has {}",
            x.len(),
            g.dim()
        )));
    }
    Ok(g.factor()?.log_pdf(x))
}

/// One draw `mean + L z`.
pub fn mvn_sample<R: Rng + ?Sized>(rng: &mut R, g: &Gaussian) -> Result<DVector<f64>> {
    Ok(g.factor()?.sample(rng))
}

#[derive(Serialize, Deserialize)]
struct GaussianRepr {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> std::result::Result<DMatrix<f64>, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged matrix rows".to_string());
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl Serialize for Gaussian {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GaussianRepr {
            mean: self.mean.iter().copied().collect(),
            cov: matrix_to_rows(&self.cov),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Gaussian {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = GaussianRepr::deserialize(d)?;
        let cov = rows_to_matrix(&repr.cov).map_err(serde::de::Error::custom)?;
        Gaussian::new(DVector::from_vec(repr.mean), cov).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn random_spd(d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded(seed);
        let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        &a * a.transpose() + DMatrix::identity(d, d) * 0.5
    }

    #[test]
    fn standard_normal_at_mode() {
        let g = Gaussian::standard(1);
        assert!((mvn_logpdf(&[0.0], &g).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn density_at_mean_is_normalizing_constant() {
        let cov = random_spd(4, 3);
        let mean = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let g = Gaussian::new(mean.clone(), cov.clone()).unwrap();
        let expected = -2.0 * LN_2PI - 0.5 * cov.determinant().ln();
        assert!((mvn_logpdf(mean.as_slice(), &g).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn logpdf_matches_dense_inverse_oracle() {
        let cov = random_spd(3, 11);
        let mean = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let g = Gaussian::new(mean.clone(), cov.clone()).unwrap();
        let x = DVector::from_vec(vec![1.1, 0.4, -0.7]);
        let diff = &x - &mean;
        let inv = cov.clone().try_inverse().unwrap();
        let quad = (diff.transpose() * inv * &diff)[(0, 0)];
        let oracle = -0.5 * (quad + 3.0 * (2.0 * std::f64::consts::PI).ln() + cov.determinant().ln());
        assert!((mvn_logpdf(x.as_slice(), &g).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_to_one_in_1d() {
        let g = Gaussian::new(DVector::from_vec(vec![0.7]), DMatrix::from_element(1, 1, 2.3)).unwrap();
        let f = g.factor().unwrap();
        let (lo, hi, n) = (-20.0, 20.0, 200_000);
        let h = (hi - lo) / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            total += w * f.log_pdf(&[x]).exp();
        }
        assert!((total * h - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sampling_is_reproducible_with_seed() {
        let g = Gaussian::standard(3);
        let a = mvn_sample(&mut seeded(5), &g).unwrap();
        let b = mvn_sample(&mut seeded(5), &g).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_moments_match() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let g = Gaussian::new(DVector::from_vec(vec![1.0, -3.0]), cov).unwrap();
        let f = g.factor().unwrap();
        let mut rng = seeded(17);
        let n = 100_000;
        let draws: Vec<DVector<f64>> = (0..n).map(|_| f.sample(&mut rng)).collect();
        let mean: DVector<f64> = draws.iter().fold(DVector::zeros(2), |a, x| a + x) / n as f64;
        assert!((mean[0] - 1.0).abs() < 4.0 * (2.0f64 / n as f64).sqrt());
        assert!((mean[1] + 3.0).abs() < 4.0 * (0.5f64 / n as f64).sqrt());
        let cross: f64 = draws
            .iter()
            .map(|x| (x[0] - mean[0]) * (x[1] - mean[1]))
            .sum::<f64>()
            / n as f64;
        let corr = cross / (2.0f64 * 0.5).sqrt();
        assert!(corr.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn jitter_rescues_semidefinite_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let chol = cholesky_jittered(&m).unwrap();
        assert!(chol.jitter > 0.0);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(cholesky_jittered(&bad).is_err());
    }

    #[test]
    fn rejects_asymmetric_or_misshaped() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(Gaussian::new(DVector::zeros(2), m).is_err());
        assert!(Gaussian::new(DVector::zeros(3), DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let g = Gaussian::new(DVector::from_vec(vec![1.0, 2.0]), random_spd(2, 1)).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: Gaussian = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
    }
}
