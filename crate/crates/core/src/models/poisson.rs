use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{BlockPartition, TemperedModel};
use crate::error::{Error, Result};
use crate::rng::{seeded, SmcRng};

/// Seed for the synthetic count-regression data set.
pub const MODEL3_SEED: u64 = 20_160_945;

/// Regression coefficients used to simulate the benchmark counts.
pub const MODEL3_TRUE_BETA: [f64; 12] =
    [1.0, 0.0, 1.5, 0.0, -2.0, 0.0, 1.0, -2.0, 0.0, 1.2, 0.0, 0.0];

/// Serialized form of [`PoissonRegressionModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoissonRegressionSpec {
    pub inputs: Vec<f64>,
    pub counts: Vec<u64>,
    pub centers: Vec<f64>,
    pub radius: f64,
    pub q: f64,
    /// Inverse-gamma shape and scale of the EP scale parameter.
    pub gamma_prior: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<BlockPartition>,
}

/// Poisson regression on a Gaussian-kernel basis with an exponential-power
/// prior on the coefficients and an inverse-gamma prior on its scale.
///
/// The sampler sees `θ = (β_0, …, β_p, ln γ)`; the log-prior includes the
/// Jacobian of the log transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PoissonRegressionSpec", into = "PoissonRegressionSpec")]
pub struct PoissonRegressionModel {
    inputs: Vec<f64>,
    counts: Vec<u64>,
    centers: Vec<f64>,
    radius: f64,
    q: f64,
    gamma_prior: (f64, f64),
    blocks: BlockPartition,
    design: Vec<Vec<f64>>,
    log_factorials: f64,
    ep_const: f64,
    ig_const: f64,
}

impl PoissonRegressionModel {
    pub fn new(
        inputs: Vec<f64>,
        counts: Vec<u64>,
        centers: Vec<f64>,
        radius: f64,
        q: f64,
        gamma_prior: (f64, f64),
        blocks: Option<BlockPartition>,
    ) -> Result<Self> {
        if inputs.len() != counts.len() {
            return Err(Error::usage("inputs and counts differ in length"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::usage(format!("kernel radius must be positive, got {radius}")));
        }
        if !(q > 0.0 && q <= 2.0) {
            return Err(Error::usage(format!("EP exponent must lie in (0, 2], got {q}")));
        }
        let (a, b) = gamma_prior;
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::usage("inverse-gamma parameters must be positive"));
        }
        let dim = centers.len() + 2;
        let blocks = match blocks {
            Some(b) => b,
            None if dim == 13 => BlockPartition::from_sizes(&[2, 2, 2, 2, 2, 3])?,
            None => BlockPartition::even(dim, 6)?,
        };
        blocks.check_dim(dim)?;
        let mut m = Self {
            inputs,
            counts,
            centers,
            radius,
            q,
            gamma_prior,
            blocks,
            design: Vec::new(),
            log_factorials: 0.0,
            ep_const: q.ln() - std::f64::consts::LN_2 - ln_gamma(1.0 / q),
            ig_const: a * b.ln() - ln_gamma(a),
        };
        m.design = m.inputs.iter().map(|&x| m.basis_row(x)).collect();
        m.log_factorials = m.counts.iter().map(|&y| ln_gamma(y as f64 + 1.0)).sum();
        Ok(m)
    }

    /// 100 inputs uniform on [0, 1], 11 centers at 0, 0.1, …, 1, r = 0.5,
    /// q = 0.5, γ ~ IG(2, 1.3), counts simulated at [`MODEL3_TRUE_BETA`].
    pub fn benchmark(n_obs: usize, seed: u64) -> Result<Self> {
        let centers: Vec<f64> = (0..11).map(|j| j as f64 / 10.0).collect();
        let mut rng = seeded(seed);
        let inputs: Vec<f64> = (0..n_obs).map(|_| rng.random::<f64>()).collect();
        let shell = Self::new(inputs.clone(), vec![0; n_obs], centers.clone(), 0.5, 0.5, (2.0, 1.3), None)?;
        let counts = shell
            .design
            .iter()
            .map(|row| {
                let mu = linear(row, &MODEL3_TRUE_BETA).exp();
                Poisson::new(mu)
                    .map(|p| p.sample(&mut rng) as u64)
                    .map_err(|e| Error::numeric(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(inputs, counts, centers, 0.5, 0.5, (2.0, 1.3), None)
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_coefficients(&self) -> usize {
        self.centers.len() + 1
    }

    /// `(1, Φ_1(x), …, Φ_p(x))` with `Φ_j(x) = exp(-(x - c_j)² / r²)`.
    pub fn basis_row(&self, x: f64) -> Vec<f64> {
        let r2 = self.radius * self.radius;
        std::iter::once(1.0)
            .chain(self.centers.iter().map(|c| (-(x - c) * (x - c) / r2).exp()))
            .collect()
    }

    /// `(log prior, log likelihood)` at `(β, γ)` on the natural scale.
    /// The prior is the EP·IG density without any change-of-variables term.
    pub fn poisson_model_logdensity(&self, theta: &[f64]) -> (f64, f64) {
        let p = self.n_coefficients();
        let (beta, gamma) = (&theta[..p], theta[p]);
        let ll = self.loglik_beta(beta);
        if !(gamma > 0.0 && gamma.is_finite()) {
            return (f64::NEG_INFINITY, ll);
        }
        (self.log_prior_natural(beta, gamma), ll)
    }

    fn log_prior_natural(&self, beta: &[f64], gamma: f64) -> f64 {
        let (a, b) = self.gamma_prior;
        let ln_g = gamma.ln();
        let ep: f64 = beta
            .iter()
            .map(|bi| self.ep_const - ln_g - (bi.abs() / gamma).powf(self.q))
            .sum();
        let ig = self.ig_const - (a + 1.0) * ln_g - b / gamma;
        super::sanitize(ep + ig)
    }

    fn loglik_beta(&self, beta: &[f64]) -> f64 {
        let mut ll = -self.log_factorials;
        for (row, &y) in self.design.iter().zip(&self.counts) {
            let eta = linear(row, beta);
            ll += y as f64 * eta - eta.exp();
        }
        super::sanitize(ll)
    }
}

fn linear(row: &[f64], beta: &[f64]) -> f64 {
    row.iter().zip(beta).map(|(a, b)| a * b).sum()
}

impl TemperedModel for PoissonRegressionModel {
    fn dim(&self) -> usize {
        self.n_coefficients() + 1
    }

    fn blocks(&self) -> &BlockPartition {
        &self.blocks
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        let p = self.n_coefficients();
        let eta = theta[p];
        let gamma = eta.exp();
        if !(gamma > 0.0 && gamma.is_finite()) {
            return f64::NEG_INFINITY;
        }
        super::sanitize(self.log_prior_natural(&theta[..p], gamma) + eta)
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.loglik_beta(&theta[..self.n_coefficients()])
    }

    fn sample_prior(&self, rng: &mut SmcRng) -> Vec<f64> {
        let (a, b) = self.gamma_prior;
        let gamma = 1.0 / Gamma::new(a, 1.0 / b).expect("validated").sample(rng);
        let mag = Gamma::new(1.0 / self.q, 1.0).expect("validated");
        let mut theta: Vec<f64> = (0..self.n_coefficients())
            .map(|_| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * gamma * mag.sample(rng).powf(1.0 / self.q)
            })
            .collect();
        theta.push(gamma.ln());
        theta
    }

    fn is_smooth(&self) -> bool {
        self.q == 2.0
    }
}

impl TryFrom<PoissonRegressionSpec> for PoissonRegressionModel {
    type Error = Error;
    fn try_from(s: PoissonRegressionSpec) -> Result<Self> {
        Self::new(s.inputs, s.counts, s.centers, s.radius, s.q, s.gamma_prior, s.blocks)
    }
}

impl From<PoissonRegressionModel> for PoissonRegressionSpec {
    fn from(m: PoissonRegressionModel) -> Self {
        PoissonRegressionSpec {
            inputs: m.inputs,
            counts: m.counts,
            centers: m.centers,
            radius: m.radius,
            q: m.q,
            gamma_prior: m.gamma_prior,
            blocks: Some(m.blocks),
        }
    }
}
