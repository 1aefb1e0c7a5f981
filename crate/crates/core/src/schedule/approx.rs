use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelConfig, MwgSettings};
use crate::models::TemperedModel;
use crate::numutil::{
    cholesky_jittered, nelder_mead_with, weighted_moments, weighted_moments_iter, Gaussian,
    NelderMeadOptions, WeightedSample,
};
use crate::rng::{stream, StreamTag};
use crate::smc::{smc_run, SmcConfig, Tempering};

/// How the prior and posterior are approximated by Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ApproxMethod {
    /// Closed forms supplied by the model.
    Analytic,
    /// Mode and finite-difference curvature.
    Laplace,
    /// Self-normalized importance sampling from the prior.
    MomentMatch { n_draws: usize },
    /// Moments of the first and last clouds of a short CESS-tempered run.
    /// For posteriors far from the prior, where prior IS degenerates.
    Pilot { n_particles: usize, cess_target: f64 },
}

impl Default for ApproxMethod {
    fn default() -> Self {
        ApproxMethod::MomentMatch { n_draws: 10_000 }
    }
}

/// Gaussian stand-ins for every tempered target, stored in information
/// form: the target at `φ` has precision `P_0 + φ P_l` and shift
/// `h_0 + φ h_l`.
#[derive(Debug, Clone)]
pub struct GaussianSequence {
    prior: Gaussian,
    posterior: Gaussian,
    prior_precision: DMatrix<f64>,
    prior_shift: DVector<f64>,
    lik_precision: DMatrix<f64>,
    lik_shift: DVector<f64>,
    clipped: usize,
}

fn inverse_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = cholesky_jittered(m)?;
    let inv = chol.factor.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

impl GaussianSequence {
    /// Builds the likelihood factor as the precision difference of posterior
    /// and prior, clipping eigenvalues below `1e-8·λ_max`.
    pub fn from_prior_posterior(prior: Gaussian, posterior: Gaussian) -> Result<Self> {
        if prior.dim() != posterior.dim() {
            return Err(Error::usage("prior and posterior approximations differ in dimension"));
        }
        let prior_precision = inverse_spd(&prior.cov)?;
        let post_precision = inverse_spd(&posterior.cov)?;
        let prior_shift = &prior_precision * &prior.mean;
        let lik_shift = &post_precision * &posterior.mean - &prior_shift;
        let diff = &post_precision - &prior_precision;
        let eig = SymmetricEigen::new((&diff + diff.transpose()) * 0.5);
        let lmax = eig.eigenvalues.max();
        let floor = if lmax > 0.0 {
            1e-8 * lmax
        } else {
            1e-8 * SymmetricEigen::new(prior_precision.clone()).eigenvalues.max()
        };
        let mut clipped = 0;
        let vals = eig.eigenvalues.map(|v| {
            if v < floor {
                clipped += 1;
                floor
            } else {
                v
            }
        });
        let lik_precision = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        let lik_precision = (&lik_precision + lik_precision.transpose()) * 0.5;
        Ok(Self {
            prior,
            posterior,
            prior_precision,
            prior_shift,
            lik_precision,
            lik_shift,
            clipped,
        })
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn prior(&self) -> &Gaussian {
        &self.prior
    }

    pub fn posterior(&self) -> &Gaussian {
        &self.posterior
    }

    /// Eigenvalues of the likelihood precision raised to the floor.
    pub fn clipped_eigenvalues(&self) -> usize {
        self.clipped
    }

    /// The Gaussian likelihood approximation `N(μ_l, Σ_l)` in θ-space.
    pub fn likelihood_gaussian(&self) -> Result<Gaussian> {
        let cov = inverse_spd(&self.lik_precision)?;
        let mean = &cov * &self.lik_shift;
        Ok(Gaussian::new_unchecked(mean, cov))
    }

    /// Approximation of the tempered target at `phi`.
    pub fn intermediate(&self, phi: f64) -> Result<Gaussian> {
        if !(0.0..=1.0).contains(&phi) {
            return Err(Error::usage(format!("phi = {phi} outside [0, 1]")));
        }
        if phi == 0.0 {
            return Ok(self.prior.clone());
        }
        let precision = &self.prior_precision + &self.lik_precision * phi;
        let cov = inverse_spd(&precision)?;
        let mean = &cov * (&self.prior_shift + &self.lik_shift * phi);
        Ok(Gaussian::new_unchecked(mean, cov))
    }
}

/// Fits the Gaussian sequence for `model`. `seed` drives the random
/// methods.
pub fn approximate_sequence<M: TemperedModel + ?Sized>(
    model: &M,
    method: &ApproxMethod,
    seed: u64,
) -> Result<GaussianSequence> {
    let (prior, posterior) = match method {
        ApproxMethod::Analytic => {
            let prior = model
                .prior_gaussian()
                .ok_or_else(|| Error::usage("the model has no closed-form Gaussian prior"))?;
            let post = model
                .exact_tempered(1.0)
                .ok_or_else(|| Error::usage("the model has no closed-form Gaussian posterior"))?;
            (prior, post)
        }
        ApproxMethod::Laplace => {
            if !model.is_smooth() {
                return Err(Error::domain("Laplace approximation needs twice-differentiable densities"));
            }
            let prior = match model.prior_gaussian() {
                Some(g) => g,
                None => {
                    let start = prior_draw_mean(model, seed, 1000);
                    laplace(|x| model.log_prior(x), &start)?
                }
            };
            let start = prior.mean.as_slice().to_vec();
            let post = laplace(|x| model.log_prior(x) + model.log_likelihood(x), &start)?;
            (prior, post)
        }
        ApproxMethod::MomentMatch { n_draws } => {
            if *n_draws < 2 {
                return Err(Error::usage("moment matching needs at least two draws"));
            }
            let draws: Vec<Vec<f64>> = (0..*n_draws)
                .map(|i| model.sample_prior(&mut stream(seed, StreamTag::Approximation, 0, i)))
                .collect();
            let prior = match model.prior_gaussian() {
                Some(g) => g,
                None => weighted_moments(&WeightedSample::uniform(draws.clone())?).gaussian,
            };
            let logw: Vec<f64> = draws
                .iter()
                .map(|p| crate::models::sanitize(model.log_likelihood(p)))
                .collect();
            let ws = WeightedSample::new(draws, logw)?;
            (prior, weighted_moments(&ws).gaussian)
        }
        ApproxMethod::Pilot { n_particles, cess_target } => {
            let mut cfg = SmcConfig::new(
                *n_particles,
                crate::schedule::CoolingSchedule::linear(2)?,
                KernelConfig::Mwg(MwgSettings::default()),
                seed,
            );
            cfg.tempering = Tempering::Cess {
                target: *cess_target,
                max_iters: 10_000,
            };
            let trace = smc_run(model, &cfg)?;
            let prior = match model.prior_gaussian() {
                Some(g) => g,
                None => weighted_moments(&trace.clouds[0].weighted_sample()).gaussian,
            };
            (prior, weighted_moments(&trace.final_cloud().weighted_sample()).gaussian)
        }
    };
    GaussianSequence::from_prior_posterior(prior, posterior)
}

fn prior_draw_mean<M: TemperedModel + ?Sized>(model: &M, seed: u64, n: usize) -> Vec<f64> {
    let draws: Vec<Vec<f64>> = (0..n)
        .map(|i| model.sample_prior(&mut stream(seed, StreamTag::Approximation, 1, i)))
        .collect();
    let w = 1.0 / n as f64;
    let m = weighted_moments_iter(model.dim(), draws.iter().map(|p| (w, p.as_slice())));
    m.gaussian.mean.as_slice().to_vec()
}

/// Gaussian at the maximizer of `logf` with covariance from the negated
/// inverse Hessian (central differences).
fn laplace<F: Fn(&[f64]) -> f64>(logf: F, start: &[f64]) -> Result<Gaussian> {
    let d = start.len();
    let opts = NelderMeadOptions {
        tol: 1e-12,
        xtol: 1e-9,
        max_iters: 2000 * d,
        step: 0.1,
    };
    let mut x = start.to_vec();
    // restarting shakes the simplex out of premature collapse
    for _ in 0..4 {
        x = nelder_mead_with(|v| -logf(v), &x, opts)?.argmin;
    }
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let f0 = logf(&x);
    let mut hess = DMatrix::zeros(d, d);
    let mut p = x.clone();
    for i in 0..d {
        p[i] = x[i] + h[i];
        let fp = logf(&p);
        p[i] = x[i] - h[i];
        let fm = logf(&p);
        p[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                p[i] = x[i] + si * h[i];
                p[j] = x[j] + sj * h[j];
                let v = logf(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let neg = -hess;
    let chol = nalgebra::Cholesky::new(neg.clone())
        .ok_or_else(|| Error::numeric("Laplace curvature is not negative definite at the mode"))?;
    let cov = chol.inverse();
    Ok(Gaussian::new_unchecked(DVector::from_vec(x), (&cov + cov.transpose()) * 0.5))
}
