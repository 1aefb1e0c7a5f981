use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{BlockPartition, TemperedModel};
use crate::error::{Error, Result};
use crate::numutil::{matrix_to_rows, rows_to_matrix};
use crate::numutil::{cholesky_jittered, Gaussian, GaussianFactor};
use crate::rng::SmcRng;

/// Serialized form of [`StudentTModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudentTSpec {
    pub h: Vec<Vec<f64>>,
    pub prior: Gaussian,
    pub scale: Vec<Vec<f64>>,
    pub dof: f64,
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<BlockPartition>,
}

/// Gaussian prior with a multivariate Student-t likelihood for `y - Hθ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "StudentTSpec", into = "StudentTSpec")]
pub struct StudentTModel {
    h: DMatrix<f64>,
    prior: Gaussian,
    scale: DMatrix<f64>,
    dof: f64,
    y: DVector<f64>,
    blocks: BlockPartition,
    prior_factor: GaussianFactor,
    scale_factor: GaussianFactor,
    log_norm: f64,
}

impl StudentTModel {
    pub fn new(
        h: DMatrix<f64>,
        prior: Gaussian,
        scale: DMatrix<f64>,
        dof: f64,
        y: DVector<f64>,
        blocks: Option<BlockPartition>,
    ) -> Result<Self> {
        let (n, d) = h.shape();
        if prior.dim() != d || scale.shape() != (n, n) || y.len() != n {
            return Err(Error::usage("inconsistent shapes in Student-t model"));
        }
        if !(dof > 0.0 && dof.is_finite()) {
            return Err(Error::usage(format!("degrees of freedom must be positive, got {dof}")));
        }
        if cholesky_jittered(&scale)?.jitter > 0.0 {
            return Err(Error::usage("Student-t scale matrix is not positive definite"));
        }
        let blocks = match blocks {
            Some(b) => b,
            None => BlockPartition::even(d, 2)?,
        };
        blocks.check_dim(d)?;
        let prior_factor = prior.factor()?;
        let scale_factor = Gaussian::new(DVector::zeros(n), scale.clone())?.factor()?;
        let nf = n as f64;
        let log_norm = ln_gamma(0.5 * (dof + nf))
            - ln_gamma(0.5 * dof)
            - 0.5 * nf * (dof * std::f64::consts::PI).ln()
            - 0.5 * scale_factor.log_det();
        Ok(Self {
            h,
            prior,
            scale,
            dof,
            y,
            blocks,
            prior_factor,
            scale_factor,
            log_norm,
        })
    }

    /// The two-parameter benchmark: `H` maps θ_1 to y_1, y_2 and θ_2 to
    /// y_3, y_4, prior `N(0, 20 I)`, `Σ_l = 0.1 I`, `y = (8, -8, 8, -8)`.
    pub fn benchmark(dof: f64) -> Result<Self> {
        let h = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let prior = Gaussian::new(DVector::zeros(2), DMatrix::identity(2, 2) * 20.0)?;
        let y = DVector::from_vec(vec![8.0, -8.0, 8.0, -8.0]);
        Self::new(h, prior, DMatrix::identity(4, 4) * 0.1, dof, y, None)
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn prior(&self) -> &Gaussian {
        &self.prior
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn scale(&self) -> &DMatrix<f64> {
        &self.scale
    }

    pub fn observations(&self) -> &DVector<f64> {
        &self.y
    }

    /// Log of the normalizing constant of the likelihood (its value at zero residual).
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// Multivariate-t log density of `y - Hθ`.
    pub fn studentt_loglik(&self, theta: &[f64]) -> f64 {
        let n = self.y.len();
        let mut r = vec![0.0; n];
        for (i, ri) in r.iter_mut().enumerate() {
            let fit: f64 = theta.iter().enumerate().map(|(j, t)| self.h[(i, j)] * t).sum();
            *ri = self.y[i] - fit;
        }
        let quad = self.scale_factor.mahalanobis_sq(&r);
        let v = self.log_norm - 0.5 * (self.dof + n as f64) * (quad / self.dof).ln_1p();
        super::sanitize(v)
    }
}

impl TemperedModel for StudentTModel {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn blocks(&self) -> &BlockPartition {
        &self.blocks
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        self.prior_factor.log_pdf(theta)
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.studentt_loglik(theta)
    }

    fn sample_prior(&self, rng: &mut SmcRng) -> Vec<f64> {
        self.prior_factor.sample(rng).as_slice().to_vec()
    }

    fn prior_gaussian(&self) -> Option<Gaussian> {
        Some(self.prior.clone())
    }
}

impl TryFrom<StudentTSpec> for StudentTModel {
    type Error = Error;
    fn try_from(s: StudentTSpec) -> Result<Self> {
        let h = rows_to_matrix(&s.h).map_err(Error::Usage)?;
        let scale = rows_to_matrix(&s.scale).map_err(Error::Usage)?;
        Self::new(h, s.prior, scale, s.dof, DVector::from_vec(s.y), s.blocks)
    }
}

impl From<StudentTModel> for StudentTSpec {
    fn from(m: StudentTModel) -> Self {
        StudentTSpec {
            h: matrix_to_rows(&m.h),
            prior: m.prior,
            scale: matrix_to_rows(&m.scale),
            dof: m.dof,
            y: m.y.iter().copied().collect(),
            blocks: Some(m.blocks),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_residual_gives_leading_constant() {
        let mut m = StudentTModel::benchmark(7.0).unwrap();
        m = StudentTModel::new(
            m.design().clone(),
            m.prior().clone(),
            m.scale().clone(),
            7.0,
            DVector::from_vec(vec![1.0, 1.0, -2.0, -2.0]),
            None,
        )
        .unwrap();
        // Γ(11/2) / (Γ(7/2) (7π)²) · |0.1 I|^{-1/2}
        let expected = ln_gamma(5.5) - ln_gamma(3.5) - 2.0 * (7.0 * std::f64::consts::PI).ln()
            + 2.0 * 10f64.ln();
        assert!((m.studentt_loglik(&[1.0, -2.0]) - expected).abs() < 1e-12);
    }

    #[test]
    fn posterior_is_sign_symmetric() {
        for nu in [0.2, 7.0] {
            let m = StudentTModel::benchmark(nu).unwrap();
            for theta in [[0.0, 0.0], [3.0, -1.5], [8.0, 8.0], [-0.4, 6.1]] {
                let neg = [-theta[0], -theta[1]];
                let a = m.log_prior(&theta) + m.log_likelihood(&theta);
                let b = m.log_prior(&neg) + m.log_likelihood(&neg);
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matches_direct_formula() {
        // spelled out with diagonal Σ_l = 0.1 I
        let nu = 0.2;
        let m = StudentTModel::benchmark(nu).unwrap();
        let theta = [1.3, -0.7];
        let y = [8.0, -8.0, 8.0, -8.0];
        let fit = [theta[0], theta[0], theta[1], theta[1]];
        let quad: f64 = y.iter().zip(fit).map(|(a, b)| (a - b) * (a - b) / 0.1).sum();
        let direct = ln_gamma((nu + 4.0) / 2.0)
            - ln_gamma(nu / 2.0)
            - 2.0 * (nu * std::f64::consts::PI).ln()
            - 0.5 * (0.1f64.powi(4)).ln()
            - (nu + 4.0) / 2.0 * (1.0 + quad / nu).ln();
        assert!((m.studentt_loglik(&theta) - direct).abs() < 1e-10);
    }

    #[test]
    fn far_parameters_stay_finite() {
        let m = StudentTModel::benchmark(0.2).unwrap();
        assert!(m.log_likelihood(&[1e150, -1e150]).is_finite());
        assert_eq!(m.log_prior(&[f64::INFINITY, 0.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(StudentTModel::benchmark(0.0).is_err());
        assert!(StudentTModel::benchmark(f64::NAN).is_err());
    }
}
