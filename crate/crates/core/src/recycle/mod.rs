//! Estimators that reuse every particle collection of a finished run.
//!
//! Each stored cloud is first made unweighted ("uniformized"). The
//! collections are then either reweighted to the posterior and mixed with
//! weights λ_t, or pooled under deterministic-mixture weights.

mod demix;
mod lambda;

pub use demix::{demix_estimate, demix_log_weights, demix_sample};
pub use lambda::{
    ess_correction_weights, lambda_naive, lambda_optimal, recycled_estimate_ess, recycled_sample_ess,
    LambdaRule,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numutil::WeightedSample;
use crate::rng::{stream, StreamTag};
use crate::smc::{resample_indices, ResampleScheme, RunTrace};

/// Unweighted particle collections, one per iteration, with what the
/// estimators need to reweight them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformizedHistory {
    pub points: Vec<Vec<Vec<f64>>>,
    pub log_likelihoods: Vec<Vec<f64>>,
    pub phis: Vec<f64>,
    /// Cumulative `log Ẑ_t`, zero at the prior.
    pub log_z: Vec<f64>,
    /// `c_t = N_t / Σ N_n`.
    pub proportions: Vec<f64>,
    /// Iterations whose cloud was reused without resampling.
    pub reused: Vec<bool>,
}

impl UniformizedHistory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn check_omega(&self, omega: &[usize]) -> Result<()> {
        if omega.is_empty() {
            return Err(Error::usage("the recycled set of iterations is empty"));
        }
        if let Some(&t) = omega.iter().find(|&&t| t >= self.len()) {
            return Err(Error::usage(format!("iteration {t} is outside a {}-step history", self.len())));
        }
        Ok(())
    }

    /// Every iteration, in order.
    pub fn all(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

/// Uniformizes with streams derived from the trace's own seed, so the result
/// is reproducible from a stored trace.
pub fn uniformize(trace: &RunTrace) -> UniformizedHistory {
    uniformize_with(trace, trace.header.seed)
}

/// Clouds with uniform weights are reused as they are; the others are
/// multinomially resampled to the same size.
pub fn uniformize_with(trace: &RunTrace, seed: u64) -> UniformizedHistory {
    let mut points = Vec::with_capacity(trace.len());
    let mut lls = Vec::with_capacity(trace.len());
    let mut reused = Vec::with_capacity(trace.len());
    for (t, cloud) in trace.clouds.iter().enumerate() {
        if cloud.is_uniform() {
            points.push(cloud.positions.clone());
            lls.push(cloud.log_likelihoods.clone());
            reused.push(true);
        } else {
            let mut rng = stream(seed, StreamTag::Uniformize, t, 0);
            let idx = resample_indices(&mut rng, &cloud.log_weights, cloud.len(), ResampleScheme::Multinomial);
            points.push(idx.iter().map(|&i| cloud.positions[i].clone()).collect());
            lls.push(idx.iter().map(|&i| cloud.log_likelihoods[i]).collect());
            reused.push(false);
        }
    }
    let total: usize = points.iter().map(Vec::len).sum();
    UniformizedHistory {
        proportions: points.iter().map(|p| p.len() as f64 / total as f64).collect(),
        points,
        log_likelihoods: lls,
        phis: trace.clouds.iter().map(|c| c.phi).collect(),
        log_z: trace.cumulative_log_evidence(),
        reused,
    }
}

/// Which particles feed a posterior estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecycleScheme {
    /// Final weighted cloud only.
    None,
    /// ESS-corrected collections mixed by total correction weight.
    Naive,
    /// ESS-corrected collections mixed by their effective sample sizes.
    Ess,
    /// Deterministic-mixture weights over the pooled collections.
    Demix,
}

impl RecycleScheme {
    pub const ALL: [RecycleScheme; 4] = [
        RecycleScheme::None,
        RecycleScheme::Naive,
        RecycleScheme::Ess,
        RecycleScheme::Demix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RecycleScheme::None => "none",
            RecycleScheme::Naive => "naive",
            RecycleScheme::Ess => "ess",
            RecycleScheme::Demix => "demix",
        }
    }
}

/// The weighted sample behind each scheme's estimates. `hist` must come
/// from `trace`.
pub fn recycled_sample(trace: &RunTrace, hist: &UniformizedHistory, scheme: RecycleScheme) -> Result<WeightedSample> {
    let omega = hist.all();
    match scheme {
        RecycleScheme::None => Ok(trace.final_cloud().weighted_sample()),
        RecycleScheme::Naive => Ok(recycled_sample_ess(hist, LambdaRule::Naive, &omega)?.0),
        RecycleScheme::Ess => Ok(recycled_sample_ess(hist, LambdaRule::Optimal, &omega)?.0),
        RecycleScheme::Demix => Ok(demix_sample(hist, &omega)?.0),
    }
}

/// Summary of one recycled estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecycleReport {
    pub scheme: RecycleScheme,
    pub estimate: Vec<f64>,
    pub omega: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    pub pooled_ess: f64,
    /// DeMix points whose mixture density vanished.
    pub zero_weight_points: usize,
}

impl RecycleReport {
    /// Posterior mean report under `scheme` over all iterations.
    pub fn posterior_mean(trace: &RunTrace, hist: &UniformizedHistory, scheme: RecycleScheme) -> Result<Self> {
        let omega = hist.all();
        let (sample, lambda, zeros) = match scheme {
            RecycleScheme::None => (trace.final_cloud().weighted_sample(), None, 0),
            RecycleScheme::Naive | RecycleScheme::Ess => {
                let rule = if scheme == RecycleScheme::Naive {
                    LambdaRule::Naive
                } else {
                    LambdaRule::Optimal
                };
                let (s, l) = recycled_sample_ess(hist, rule, &omega)?;
                (s, Some(l), 0)
            }
            RecycleScheme::Demix => {
                let (s, z) = demix_sample(hist, &omega)?;
                (s, None, z)
            }
        };
        Ok(Self {
            scheme,
            estimate: sample.mean(),
            omega: if scheme == RecycleScheme::None { vec![trace.len() - 1] } else { omega },
            lambda,
            pooled_ess: sample.ess(),
            zero_weight_points: zeros,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
