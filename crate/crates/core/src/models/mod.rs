//! Tempered targets `γ_φ(θ) = p(θ) p(y|θ)^φ` and the benchmark models.

mod gaussian_linear;
mod poisson;
mod student_t;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use gaussian_linear::{GaussianLinearModel, GaussianLinearSpec, MODEL1_SEED};
pub use poisson::{PoissonRegressionModel, PoissonRegressionSpec, MODEL3_SEED, MODEL3_TRUE_BETA};
pub use student_t::{StudentTModel, StudentTSpec};

use crate::error::{Error, Result};
use crate::numutil::Gaussian;
use crate::rng::SmcRng;

/// Contiguous coordinate blocks updated one at a time by Metropolis-within-Gibbs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BlockPartition {
    ranges: Vec<Range<usize>>,
}

impl BlockPartition {
    /// Consecutive blocks with the given sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::usage("block sizes must be non-empty and positive"));
        }
        let mut start = 0;
        let ranges = sizes
            .iter()
            .map(|&s| {
                let r = start..start + s;
                start += s;
                r
            })
            .collect();
        Ok(Self { ranges })
    }

    /// `blocks` nearly equal consecutive blocks covering `0..dim`.
    pub fn even(dim: usize, blocks: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::usage("dimension must be positive"));
        }
        let b = blocks.clamp(1, dim);
        let sizes: Vec<usize> = (0..b).map(|i| dim / b + usize::from(i < dim % b)).collect();
        Self::from_sizes(&sizes)
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::from_sizes(&[dim])
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::usage(format!(
                "block partition covers {} coordinates but the model has {dim}",
                self.dim()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for BlockPartition {
    type Error = Error;
    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Self::from_sizes(&sizes)
    }
}

impl From<BlockPartition> for Vec<usize> {
    fn from(b: BlockPartition) -> Self {
        b.sizes()
    }
}

/// A Bayesian model seen as a family of tempered targets.
///
/// Log-densities return `-inf` (never NaN) outside the support.
pub trait TemperedModel: Send + Sync {
    fn dim(&self) -> usize;

    fn blocks(&self) -> &BlockPartition;

    fn log_prior(&self, theta: &[f64]) -> f64;

    fn log_likelihood(&self, theta: &[f64]) -> f64;

    fn sample_prior(&self, rng: &mut SmcRng) -> Vec<f64>;

    /// The prior, when it is exactly Gaussian.
    fn prior_gaussian(&self) -> Option<Gaussian> {
        None
    }

    /// The normalized tempered target at `phi`, when it is exactly Gaussian.
    fn exact_tempered(&self, _phi: f64) -> Option<Gaussian> {
        None
    }

    /// Whether both log-densities are twice differentiable (Laplace applies).
    fn is_smooth(&self) -> bool {
        true
    }
}

/// Unnormalized `log p(θ) + φ log p(y|θ)`.
pub fn tempered_logdensity<M: TemperedModel + ?Sized>(m: &M, theta: &[f64], phi: f64) -> f64 {
    let lp = m.log_prior(theta);
    if !(lp > f64::NEG_INFINITY) {
        return f64::NEG_INFINITY;
    }
    if phi == 0.0 {
        return lp;
    }
    combine(lp, m.log_likelihood(theta), phi)
}

/// `lp + φ·ll` with NaN mapped to `-inf` and `0·(-inf)` taken as zero.
#[inline]
pub(crate) fn combine(lp: f64, ll: f64, phi: f64) -> f64 {
    let ll = sanitize(ll);
    let v = if phi == 0.0 { lp } else { lp + phi * ll };
    sanitize(v)
}

#[inline]
pub(crate) fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Any of the benchmark models, serialized with a `kind` tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnyModel {
    GaussianLinear(GaussianLinearModel),
    StudentT(StudentTModel),
    PoissonRegression(PoissonRegressionModel),
}

macro_rules! delegate {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            AnyModel::GaussianLinear($m) => $e,
            AnyModel::StudentT($m) => $e,
            AnyModel::PoissonRegression($m) => $e,
        }
    };
}

impl TemperedModel for AnyModel {
    fn dim(&self) -> usize {
        delegate!(self, m => m.dim())
    }
    fn blocks(&self) -> &BlockPartition {
        delegate!(self, m => m.blocks())
    }
    fn log_prior(&self, theta: &[f64]) -> f64 {
        delegate!(self, m => m.log_prior(theta))
    }
    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        delegate!(self, m => m.log_likelihood(theta))
    }
    fn sample_prior(&self, rng: &mut SmcRng) -> Vec<f64> {
        delegate!(self, m => m.sample_prior(rng))
    }
    fn prior_gaussian(&self) -> Option<Gaussian> {
        delegate!(self, m => m.prior_gaussian())
    }
    fn exact_tempered(&self, phi: f64) -> Option<Gaussian> {
        delegate!(self, m => m.exact_tempered(phi))
    }
    fn is_smooth(&self) -> bool {
        delegate!(self, m => m.is_smooth())
    }
}

impl AnyModel {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::GaussianLinear(_) => "gaussian_linear",
            AnyModel::StudentT(_) => "student_t",
            AnyModel::PoissonRegression(_) => "poisson_regression",
        }
    }
}
