use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{BlockPartition, TemperedModel};
use crate::error::{Error, Result};
use crate::numutil::{cholesky_jittered, Gaussian, GaussianFactor, LN_2PI};
use crate::rng::{seeded, SmcRng};

/// Seed used to draw the design matrix, true parameter and noise of the
/// linear-Gaussian benchmark instances.
pub const MODEL1_SEED: u64 = 20_160_907;

/// Serialized form of [`GaussianLinearModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianLinearSpec {
    /// n×d design matrix, row-major.
    pub h: Vec<Vec<f64>>,
    pub prior: Gaussian,
    /// n×n observation-noise covariance, row-major.
    pub noise_cov: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<BlockPartition>,
}

/// `θ ~ N(μ, Σ)`, `y | θ ~ N(Hθ, Σ_y)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GaussianLinearSpec", into = "GaussianLinearSpec")]
pub struct GaussianLinearModel {
    h: DMatrix<f64>,
    prior: Gaussian,
    noise_cov: DMatrix<f64>,
    y: DVector<f64>,
    blocks: BlockPartition,
    prior_factor: GaussianFactor,
    // log p(y|θ) = const + bᵀθ - ½ θᵀAθ
    info: DMatrix<f64>,
    shift: DVector<f64>,
    loglik_const: f64,
}

impl GaussianLinearModel {
    pub fn new(
        h: DMatrix<f64>,
        prior: Gaussian,
        noise_cov: DMatrix<f64>,
        y: DVector<f64>,
        blocks: Option<BlockPartition>,
    ) -> Result<Self> {
        let (n, d) = h.shape();
        if prior.dim() != d || noise_cov.shape() != (n, n) || y.len() != n {
            return Err(Error::usage(format!(
                "inconsistent shapes: H {n}x{d}, prior {}, noise {:?}, y {}",
                prior.dim(),
                noise_cov.shape(),
                y.len()
            )));
        }
        let blocks = match blocks {
            Some(b) => b,
            None => BlockPartition::even(d, 5)?,
        };
        blocks.check_dim(d)?;
        let prior_factor = prior.factor()?;
        let noise = cholesky_jittered(&noise_cov)?.factor;
        let noise_log_det = 2.0 * noise.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let inv_h = noise.solve(&h);
        let inv_y = noise.solve(&y);
        let info = h.transpose() * &inv_h;
        let info = (&info + info.transpose()) * 0.5;
        let shift = h.transpose() * &inv_y;
        let loglik_const = -0.5 * (y.dot(&inv_y) + n as f64 * LN_2PI + noise_log_det);
        Ok(Self {
            h,
            prior,
            noise_cov,
            y,
            blocks,
            prior_factor,
            info,
            shift,
            loglik_const,
        })
    }

    /// Benchmark instance: `H` with i.i.d. standard-normal entries, prior
    /// `N(0, 10 I_d)`, unit observation noise, `y` simulated from a prior draw.
    pub fn benchmark(dim: usize, n_obs: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let h = DMatrix::from_fn(n_obs, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let prior = Gaussian::new(DVector::zeros(dim), DMatrix::identity(dim, dim) * 10.0)?;
        let theta: DVector<f64> =
            DVector::from_fn(dim, |_, _| 10f64.sqrt() * rng.sample::<f64, _>(StandardNormal));
        let noise = DVector::from_fn(n_obs, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &h * theta + noise;
        Self::new(h, prior, DMatrix::identity(n_obs, n_obs), y, None)
    }

    /// d = n = 1, H = 1, prior N(0, 10), unit noise, y = 5.
    pub fn scalar_example() -> Self {
        Self::new(
            DMatrix::from_element(1, 1, 1.0),
            Gaussian::new_unchecked(DVector::zeros(1), DMatrix::from_element(1, 1, 10.0)),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 5.0),
            None,
        )
        .expect("valid scalar instance")
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn prior(&self) -> &Gaussian {
        &self.prior
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    pub fn observations(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    /// Returns `S = HΣHᵀ + noise_scale·Σ_y` factorized and the gain `ΣHᵀ S⁻¹`.
    fn gain(&self, noise_scale: f64) -> Result<(nalgebra::Cholesky<f64, nalgebra::Dyn>, DMatrix<f64>)> {
        let sh = &self.prior.cov * self.h.transpose();
        let s = &self.h * &sh + &self.noise_cov * noise_scale;
        let s = (&s + s.transpose()) * 0.5;
        let chol = nalgebra::Cholesky::new(s)
            .ok_or_else(|| Error::numeric("H Σ Hᵀ + Σ_y is singular"))?;
        let gain = chol.solve(&sh.transpose()).transpose();
        Ok((chol, gain))
    }

    fn conditioned(&self, noise_scale: f64) -> Result<Gaussian> {
        let (_, gain) = self.gain(noise_scale)?;
        let innovation = &self.y - &self.h * &self.prior.mean;
        let mean = &self.prior.mean + &gain * innovation;
        let d = self.prior.dim();
        let cov = (DMatrix::identity(d, d) - &gain * &self.h) * &self.prior.cov;
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(Gaussian::new_unchecked(mean, cov))
    }

    /// Posterior `N(μ_p, Σ_p)`.
    pub fn gauss_posterior(&self) -> Result<Gaussian> {
        self.conditioned(1.0)
    }

    /// `log N(y | Hμ, HΣHᵀ + Σ_y)`.
    pub fn gauss_log_evidence(&self) -> Result<f64> {
        let (chol, _) = self.gain(1.0)?;
        let r = &self.y - &self.h * &self.prior.mean;
        let quad = r.dot(&chol.solve(&r));
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(-0.5 * (quad + self.n_obs() as f64 * LN_2PI + log_det))
    }

    /// The normalized tempered target at `phi`: the posterior with noise
    /// covariance `Σ_y / φ`. `phi = 0` returns the prior.
    pub fn perfect_mixing_params(&self, phi: f64) -> Result<Gaussian> {
        if !(0.0..=1.0).contains(&phi) {
            return Err(Error::usage(format!("phi = {phi} outside [0, 1]")));
        }
        if phi == 0.0 {
            return Ok(self.prior.clone());
        }
        self.conditioned(1.0 / phi)
    }
}

impl TemperedModel for GaussianLinearModel {
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
        let d = theta.len();
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..d {
            lin += self.shift[i] * theta[i];
            let mut row = 0.5 * self.info[(i, i)] * theta[i];
            for j in 0..i {
                row += self.info[(i, j)] * theta[j];
            }
            quad += row * theta[i];
        }
        self.loglik_const + lin - quad
    }

    fn sample_prior(&self, rng: &mut SmcRng) -> Vec<f64> {
        self.prior_factor.sample(rng).as_slice().to_vec()
    }

    fn prior_gaussian(&self) -> Option<Gaussian> {
        Some(self.prior.clone())
    }

    fn exact_tempered(&self, phi: f64) -> Option<Gaussian> {
        self.perfect_mixing_params(phi).ok()
    }
}

impl TryFrom<GaussianLinearSpec> for GaussianLinearModel {
    type Error = Error;
    fn try_from(s: GaussianLinearSpec) -> Result<Self> {
        let h = crate::numutil::rows_to_matrix(&s.h).map_err(Error::Usage)?;
        let noise = crate::numutil::rows_to_matrix(&s.noise_cov).map_err(Error::Usage)?;
        Self::new(h, s.prior, noise, DVector::from_vec(s.y), s.blocks)
    }
}

impl From<GaussianLinearModel> for GaussianLinearSpec {
    fn from(m: GaussianLinearModel) -> Self {
        use crate::numutil::matrix_to_rows;
        GaussianLinearSpec {
            h: matrix_to_rows(&m.h),
            prior: m.prior,
            noise_cov: matrix_to_rows(&m.noise_cov),
            y: m.y.iter().copied().collect(),
            blocks: Some(m.blocks),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numutil::mvn_logpdf;
    use rand::Rng;

    #[test]
    fn scalar_posterior_and_evidence() {
        let m = GaussianLinearModel::scalar_example();
        let post = m.gauss_posterior().unwrap();
        assert!((post.mean[0] - 50.0 / 11.0).abs() < 1e-12);
        assert!((post.cov[(0, 0)] - 10.0 / 11.0).abs() < 1e-12);
        let expected = -0.5 * (2.0 * std::f64::consts::PI * 11.0).ln() - 25.0 / 22.0;
        assert!((m.gauss_log_evidence().unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_innovation_keeps_prior_mean() {
        let base = GaussianLinearModel::benchmark(3, 5, 1).unwrap();
        let prior = Gaussian::new(
            DVector::from_vec(vec![1.0, -1.0, 0.5]),
            DMatrix::identity(3, 3) * 2.0,
        )
        .unwrap();
        let y = base.design() * &prior.mean;
        let m = GaussianLinearModel::new(base.design().clone(), prior.clone(), DMatrix::identity(5, 5), y.clone(), None).unwrap();
        let post = m.gauss_posterior().unwrap();
        assert!((&post.mean - &prior.mean).amax() < 1e-12);
        // evidence is maximal over y at y = Hμ
        let bumped = GaussianLinearModel::new(
            base.design().clone(),
            prior,
            DMatrix::identity(5, 5),
            y.add_scalar(0.1),
            None,
        )
        .unwrap();
        assert!(m.gauss_log_evidence().unwrap() > bumped.gauss_log_evidence().unwrap());
    }

    #[test]
    fn uninformative_noise_returns_prior() {
        let base = GaussianLinearModel::benchmark(2, 3, 4).unwrap();
        let m = GaussianLinearModel::new(
            base.design().clone(),
            base.prior().clone(),
            DMatrix::identity(3, 3) * 1e12,
            base.observations().clone(),
            None,
        )
        .unwrap();
        let post = m.gauss_posterior().unwrap();
        assert!((&post.mean - &m.prior().mean).amax() < 1e-8);
        assert!((&post.cov - &m.prior().cov).amax() < 1e-8);
    }

    #[test]
    fn bayes_identity_holds_pointwise() {
        for m in [GaussianLinearModel::scalar_example(), GaussianLinearModel::benchmark(10, 20, MODEL1_SEED).unwrap()] {
            let post = m.gauss_posterior().unwrap();
            let logz = m.gauss_log_evidence().unwrap();
            let mut rng = seeded(99);
            for _ in 0..100 {
                let theta: Vec<f64> = (0..m.dim())
                    .map(|i| post.mean[i] + 2.0 * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let lhs = mvn_logpdf(&theta, &post).unwrap();
                let rhs = m.log_prior(&theta) + m.log_likelihood(&theta) - logz;
                assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn likelihood_matches_direct_residual_form() {
        let m = GaussianLinearModel::benchmark(4, 6, 8).unwrap();
        let noise = Gaussian::new(DVector::zeros(6), m.noise_cov().clone()).unwrap();
        let theta = [0.3, -1.0, 2.0, 0.1];
        let r = m.observations() - m.design() * DVector::from_row_slice(&theta);
        let direct = mvn_logpdf(r.as_slice(), &noise).unwrap();
        assert!((m.log_likelihood(&theta) - direct).abs() < 1e-9);
    }

    #[test]
    fn perfect_mixing_endpoints() {
        let m = GaussianLinearModel::benchmark(3, 4, 2).unwrap();
        let post = m.gauss_posterior().unwrap();
        let one = m.perfect_mixing_params(1.0).unwrap();
        assert!((&one.mean - &post.mean).amax() < 1e-12);
        assert!((&one.cov - &post.cov).amax() < 1e-12);
        let tiny = m.perfect_mixing_params(1e-12).unwrap();
        assert!((&tiny.mean - &m.prior().mean).amax() < 1e-8);
        assert!((&tiny.cov - &m.prior().cov).amax() < 1e-8);
        assert_eq!(m.perfect_mixing_params(0.0).unwrap(), *m.prior());
    }

    #[test]
    fn tempered_grid_normalization_matches_perfect_mixing() {
        let m = GaussianLinearModel::scalar_example();
        let phi = 0.5;
        let target = m.perfect_mixing_params(phi).unwrap();
        let (lo, hi, n) = (-25.0, 30.0, 110_000);
        let h = (hi - lo) / n as f64;
        let grid: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
        let logs: Vec<f64> = grid.iter().map(|&x| super::super::tempered_logdensity(&m, &[x], phi)).collect();
        let z: f64 = logs
            .iter()
            .enumerate()
            .map(|(i, l)| if i == 0 || i == n { 0.5 } else { 1.0 } * l.exp())
            .sum::<f64>()
            * h;
        for (x, l) in grid.iter().zip(&logs).step_by(997) {
            let grid_density = l.exp() / z;
            let exact = mvn_logpdf(&[*x], &target).unwrap().exp();
            assert!((grid_density - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn spec_roundtrip_preserves_densities() {
        let m = GaussianLinearModel::benchmark(3, 4, 5).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: GaussianLinearModel = serde_json::from_str(&s).unwrap();
        let theta = [0.2, 0.1, -0.3];
        assert_eq!(m.log_likelihood(&theta), back.log_likelihood(&theta));
        assert_eq!(m.blocks(), back.blocks());
    }
}
