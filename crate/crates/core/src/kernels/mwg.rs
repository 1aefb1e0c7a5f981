use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{combine, BlockPartition, TemperedModel};
use crate::numutil::{cholesky_jittered, weighted_moments_iter};
use crate::rng::SmcRng;
use crate::smc::ParticleCloud;

/// Tuning of the adaptive Metropolis-within-Gibbs kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MwgSettings {
    /// Full sweeps over all blocks per SMC iteration.
    pub n_mcmc: usize,
    /// Overrides the model's own block partition.
    pub blocks: Option<BlockPartition>,
    pub rate_high: f64,
    pub rate_low: f64,
    pub factor_up: f64,
    pub factor_down: f64,
}

impl Default for MwgSettings {
    fn default() -> Self {
        Self {
            n_mcmc: 5,
            blocks: None,
            rate_high: 0.7,
            rate_low: 0.2,
            factor_up: 5.0,
            factor_down: 0.2,
        }
    }
}

impl MwgSettings {
    pub fn with_sweeps(n_mcmc: usize) -> Self {
        Self {
            n_mcmc,
            ..Self::default()
        }
    }
}

/// Block proposal covariances and the acceptance history that rescales them.
#[derive(Debug, Clone)]
pub struct MwgState {
    settings: MwgSettings,
    partition: BlockPartition,
    /// Particle covariance per block, before scaling.
    base_covs: Vec<DMatrix<f64>>,
    /// Cumulative acceptance-driven factor per block.
    scales: Vec<f64>,
    lowers: Vec<DMatrix<f64>>,
    rates: Option<Vec<f64>>,
    warnings: Vec<String>,
}

impl MwgState {
    /// Initial proposals: the prior covariance of each block (identity when
    /// the prior is not Gaussian) times `2.38² / d_b`.
    pub fn new<M: TemperedModel + ?Sized>(model: &M, settings: MwgSettings) -> Result<Self> {
        if settings.n_mcmc == 0 {
            return Err(Error::usage("n_mcmc must be at least 1"));
        }
        if !(settings.rate_low <= settings.rate_high && settings.factor_up > 0.0 && settings.factor_down > 0.0) {
            return Err(Error::usage("inconsistent acceptance-rate thresholds or factors"));
        }
        let partition = settings.blocks.clone().unwrap_or_else(|| model.blocks().clone());
        partition.check_dim(model.dim())?;
        let prior = model.prior_gaussian();
        let covs = partition
            .ranges()
            .iter()
            .map(|r| {
                let db = r.len();
                let c = match &prior {
                    Some(g) => g.marginal(r.clone()).cov,
                    None => DMatrix::identity(db, db),
                };
                c * (2.38 * 2.38 / db as f64)
            })
            .collect();
        Self::with_covariances(partition, covs, settings)
    }

    /// A state with explicit block covariances and unit scales.
    pub fn with_covariances(
        partition: BlockPartition,
        covs: Vec<DMatrix<f64>>,
        settings: MwgSettings,
    ) -> Result<Self> {
        if covs.len() != partition.len()
            || covs.iter().zip(partition.ranges()).any(|(c, r)| c.shape() != (r.len(), r.len()))
        {
            return Err(Error::usage("one square covariance per block is required"));
        }
        let mut state = Self {
            scales: vec![1.0; covs.len()],
            lowers: Vec::new(),
            base_covs: covs,
            settings,
            partition,
            rates: None,
            warnings: Vec::new(),
        };
        state.refactor()?;
        Ok(state)
    }

    pub fn settings(&self) -> &MwgSettings {
        &self.settings
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    /// Current proposal covariances `scale_b · Σ_b`.
    pub fn block_covs(&self) -> Vec<DMatrix<f64>> {
        self.base_covs.iter().zip(&self.scales).map(|(c, s)| c * *s).collect()
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Acceptance rates that the next [`adapt_covariances`] call reacts to.
    pub fn set_acceptance_rates(&mut self, rates: Vec<f64>) {
        self.rates = Some(rates);
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub(crate) fn take_warnings(&mut self) -> Vec<String> {
        std::mem::take(&mut self.warnings)
    }

    fn refactor(&mut self) -> Result<()> {
        let mut lowers = Vec::with_capacity(self.base_covs.len());
        for (b, (c, s)) in self.base_covs.iter().zip(&self.scales).enumerate() {
            let chol = cholesky_jittered(&(c * *s))?;
            if chol.jitter > 0.0 {
                self.warnings.push(format!("block {b}: proposal covariance jittered by {:e}", chol.jitter));
            }
            lowers.push(chol.factor.l());
        }
        self.lowers = lowers;
        Ok(())
    }
}

/// Sets each block covariance to the weighted particle covariance of
/// `prev_cloud`, then rescales blocks whose last acceptance rate fell
/// outside `[rate_low, rate_high]`. The rescaling compounds across
/// iterations and acceptance rates are consumed by this call.
pub fn adapt_covariances(prev_cloud: &ParticleCloud, state: &mut MwgState) -> Result<()> {
    let weights = prev_cloud.weights();
    for (b, range) in state.partition.ranges().to_vec().into_iter().enumerate() {
        let items = weights
            .iter()
            .zip(&prev_cloud.positions)
            .map(|(&w, p)| (w, &p[range.clone()]));
        let cov = weighted_moments_iter(range.len(), items).gaussian.cov;
        if cov.iter().all(|v| *v == 0.0) || !cov.iter().all(|v| v.is_finite()) {
            state
                .warnings
                .push(format!("iteration {}: block {b} collapsed, proposal kept", prev_cloud.iteration));
        } else {
            state.base_covs[b] = cov;
        }
    }
    if let Some(rates) = state.rates.take() {
        let s = &state.settings;
        for (scale, rate) in state.scales.iter_mut().zip(rates) {
            if rate > s.rate_high {
                *scale *= s.factor_up;
            } else if rate < s.rate_low {
                *scale *= s.factor_down;
            }
        }
    }
    state.refactor()
}

/// `min(1, exp(Δ))` computed without overflow. An improper proposal
/// (`-inf`) is never accepted; a proper one from an improper state always is.
pub(crate) fn acceptance_probability(log_current: f64, log_proposed: f64) -> f64 {
    let delta = log_proposed - log_current;
    if delta.is_nan() {
        return 0.0;
    }
    delta.min(0.0).exp()
}

/// Result of [`mwg_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub theta: Vec<f64>,
    pub log_likelihood: f64,
    /// Accepted proposals per block, over all sweeps.
    pub accepted: Vec<u32>,
}

/// `n_mcmc` Gibbs sweeps; each block in turn gets a Gaussian random-walk
/// proposal accepted with the tempered Metropolis ratio. Blocks already
/// visited in a sweep keep their new values.
pub fn mwg_sweep<M: TemperedModel + ?Sized>(
    rng: &mut SmcRng,
    model: &M,
    theta: &[f64],
    phi: f64,
    state: &MwgState,
) -> SweepOutcome {
    let mut theta = theta.to_vec();
    let mut ll = crate::models::sanitize(model.log_likelihood(&theta));
    let mut accepted = vec![0; state.partition.len()];
    sweep_in_place(rng, model, &mut theta, &mut ll, phi, state, &mut accepted);
    SweepOutcome {
        theta,
        log_likelihood: ll,
        accepted,
    }
}

pub(crate) fn sweep_in_place<M: TemperedModel + ?Sized>(
    rng: &mut SmcRng,
    model: &M,
    theta: &mut [f64],
    ll: &mut f64,
    phi: f64,
    state: &MwgState,
    accepted: &mut [u32],
) {
    let mut current = combine(model.log_prior(theta), *ll, phi);
    let mut proposal = theta.to_vec();
    let mut z = Vec::new();
    for _ in 0..state.settings.n_mcmc {
        for (b, range) in state.partition.ranges().iter().enumerate() {
            let lower = &state.lowers[b];
            z.clear();
            z.extend((0..range.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
            for (i, k) in range.clone().enumerate() {
                let step: f64 = (0..=i).map(|j| lower[(i, j)] * z[j]).sum();
                proposal[k] = theta[k] + step;
            }
            let lp_new = model.log_prior(&proposal);
            let (ll_new, target_new) = if lp_new > f64::NEG_INFINITY {
                let l = crate::models::sanitize(model.log_likelihood(&proposal));
                (l, combine(lp_new, l, phi))
            } else {
                (f64::NEG_INFINITY, f64::NEG_INFINITY)
            };
            let u: f64 = rng.random();
            if u < acceptance_probability(current, target_new) {
                theta[range.clone()].copy_from_slice(&proposal[range.clone()]);
                *ll = ll_new;
                current = target_new;
                accepted[b] += 1;
            } else {
                proposal[range.clone()].copy_from_slice(&theta[range.clone()]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GaussianLinearModel;
    use crate::numutil::{weighted_moments, WeightedSample};
    use crate::rng::{seeded, stream, StreamTag};

    fn cloud(points: Vec<Vec<f64>>) -> ParticleCloud {
        let n = points.len();
        ParticleCloud {
            log_likelihoods: vec![0.0; n],
            log_weights: vec![-(n as f64).ln(); n],
            positions: points,
            phi: 0.0,
            iteration: 1,
        }
    }

    fn state_for(dim: usize, sizes: &[usize]) -> MwgState {
        let partition = BlockPartition::from_sizes(sizes).unwrap();
        assert_eq!(partition.dim(), dim);
        let covs = sizes.iter().map(|&s| DMatrix::identity(s, s)).collect();
        MwgState::with_covariances(partition, covs, MwgSettings::default()).unwrap()
    }

    #[test]
    fn uniform_weights_give_sample_covariance() {
        let pts = vec![vec![0.0, 1.0, 2.0], vec![1.0, -1.0, 0.0], vec![3.0, 0.5, 1.0], vec![-2.0, 0.0, 4.0]];
        let mut st = state_for(3, &[2, 1]);
        adapt_covariances(&cloud(pts.clone()), &mut st).unwrap();
        let covs = st.block_covs();
        let m0 = pts.iter().map(|p| p[0]).sum::<f64>() / 4.0;
        let m1 = pts.iter().map(|p| p[1]).sum::<f64>() / 4.0;
        let c01 = pts.iter().map(|p| (p[0] - m0) * (p[1] - m1)).sum::<f64>() / 4.0;
        let m2 = pts.iter().map(|p| p[2]).sum::<f64>() / 4.0;
        let c22 = pts.iter().map(|p| (p[2] - m2).powi(2)).sum::<f64>() / 4.0;
        assert!((covs[0][(0, 1)] - c01).abs() < 1e-12);
        assert!((covs[1][(0, 0)] - c22).abs() < 1e-12);
    }

    #[test]
    fn rescaling_follows_acceptance_rates() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64 % 7.0]).collect();
        let c = cloud(pts);
        let mut st = state_for(2, &[1, 1]);
        adapt_covariances(&c, &mut st).unwrap();
        let base = st.block_covs();

        st.set_acceptance_rates(vec![0.5, 0.2]);
        adapt_covariances(&c, &mut st).unwrap();
        assert_eq!(st.block_covs(), base);

        st.set_acceptance_rates(vec![0.9, 0.1]);
        adapt_covariances(&c, &mut st).unwrap();
        let scaled = st.block_covs();
        assert!((scaled[0][(0, 0)] - 5.0 * base[0][(0, 0)]).abs() < 1e-12);
        assert!((scaled[1][(0, 0)] - 0.2 * base[1][(0, 0)]).abs() < 1e-12);

        // without fresh rates the factor is kept, not reapplied
        adapt_covariances(&c, &mut st).unwrap();
        assert_eq!(st.block_covs(), scaled);
    }

    #[test]
    fn collapsed_block_keeps_previous_proposal() {
        let mut st = state_for(1, &[1]);
        adapt_covariances(&cloud(vec![vec![2.0]; 5]), &mut st).unwrap();
        assert_eq!(st.block_covs()[0][(0, 0)], 1.0);
        assert_eq!(st.warnings().len(), 1);
    }

    #[test]
    fn tiny_proposals_are_almost_always_accepted() {
        let m = GaussianLinearModel::benchmark(4, 6, 3).unwrap();
        let partition = BlockPartition::from_sizes(&[2, 2]).unwrap();
        let covs = vec![DMatrix::identity(2, 2) * 1e-30; 2];
        let st = MwgState::with_covariances(partition, covs, MwgSettings::with_sweeps(10)).unwrap();
        let theta = vec![0.3, -0.2, 1.0, 0.5];
        let out = mwg_sweep(&mut seeded(5), &m, &theta, 0.7, &st);
        assert!(out.accepted.iter().all(|&a| a >= 9));
        for (a, b) in out.theta.iter().zip(&theta) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((out.log_likelihood - m.log_likelihood(&out.theta)).abs() < 1e-9);
    }

    #[test]
    fn mirrored_proposals_have_equal_ratios() {
        // symmetric target about zero: π(x) and π(-x) agree, so a move
        // x -> x+s has the same ratio as -x -> -x-s
        let m = crate::models::StudentTModel::benchmark(7.0).unwrap();
        let phi = 0.6;
        let x = [1.2, -0.4];
        let y = [1.5, -0.9];
        let t = |v: &[f64]| crate::models::tempered_logdensity(&m, v, phi);
        let a = acceptance_probability(t(&x), t(&y));
        let b = acceptance_probability(t(&[-x[0], -x[1]]), t(&[-y[0], -y[1]]));
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn detailed_balance_on_a_finite_state_space() {
        // random-walk Metropolis on 5 states with symmetric proposal q
        let log_pi = [-0.3, -2.0, -0.1, -5.0, -1.2];
        let q = [
            [0.2, 0.3, 0.2, 0.2, 0.1],
            [0.3, 0.1, 0.3, 0.2, 0.1],
            [0.2, 0.3, 0.1, 0.1, 0.3],
            [0.2, 0.2, 0.1, 0.4, 0.1],
            [0.1, 0.1, 0.3, 0.1, 0.4],
        ];
        let mut p = [[0.0; 5]; 5];
        for i in 0..5 {
            let mut stay = 1.0;
            for j in 0..5 {
                if i != j {
                    p[i][j] = q[i][j] * acceptance_probability(log_pi[i], log_pi[j]);
                    stay -= p[i][j];
                }
            }
            p[i][i] = stay;
        }
        let z: f64 = log_pi.iter().map(|v: &f64| v.exp()).sum();
        let pi: Vec<f64> = log_pi.iter().map(|v| v.exp() / z).collect();
        for i in 0..5 {
            for j in 0..5 {
                assert!((pi[i] * p[i][j] - pi[j] * p[j][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn improper_proposals_are_rejected() {
        assert_eq!(acceptance_probability(-3.0, f64::NEG_INFINITY), 0.0);
        assert_eq!(acceptance_probability(f64::NEG_INFINITY, f64::NEG_INFINITY), 0.0);
        assert_eq!(acceptance_probability(f64::NEG_INFINITY, -1.0), 1.0);
        assert_eq!(acceptance_probability(-1.0, 1e308), 1.0);

        // a Poisson-regression chain started in the support never leaves it
        let m = crate::models::PoissonRegressionModel::benchmark(30, 2).unwrap();
        let mut st = MwgState::new(&m, MwgSettings::default()).unwrap();
        st.set_acceptance_rates(vec![0.0; 6]);
        let mut rng = seeded(9);
        let mut theta = m.sample_prior(&mut rng);
        for _ in 0..20 {
            theta = mwg_sweep(&mut rng, &m, &theta, 1.0, &st).theta;
            assert!(crate::models::tempered_logdensity(&m, &theta, 1.0) > f64::NEG_INFINITY);
        }
    }

    #[test]
    fn one_sweep_preserves_the_tempered_gaussian() {
        let m = GaussianLinearModel::benchmark(4, 6, MODEL_SEED).unwrap();
        let phi = 0.4;
        let target = m.perfect_mixing_params(phi).unwrap();
        let partition = BlockPartition::from_sizes(&[2, 2]).unwrap();
        let covs = partition.ranges().iter().map(|r| target.marginal(r.clone()).cov).collect();
        let st = MwgState::with_covariances(partition, covs, MwgSettings::with_sweeps(1)).unwrap();
        let factor = target.factor().unwrap();
        let n = 100_000;
        let moved: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut rng = stream(77, StreamTag::Auxiliary, 0, i);
                let start = factor.sample(&mut rng).as_slice().to_vec();
                mwg_sweep(&mut rng, &m, &start, phi, &st).theta
            })
            .collect();
        let mom = weighted_moments(&WeightedSample::uniform(moved).unwrap()).gaussian;
        let nf = n as f64;
        for i in 0..4 {
            let var = target.cov[(i, i)];
            // chain output is still an exact draw, so i.i.d. standard errors apply
            assert!((mom.mean[i] - target.mean[i]).abs() < 4.0 * (var / nf).sqrt());
            assert!((mom.cov[(i, i)] - var).abs() < 4.0 * var * (2.0 / nf).sqrt());
        }
    }

    const MODEL_SEED: u64 = 17;
}
