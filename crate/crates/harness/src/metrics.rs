//! Per-replicate metric rows and the summaries derived from them.

use serde::{Deserialize, Serialize};

use crate::emit::json_float;

/// One estimator applied to one sampler run.
///
/// `log_evidence` and `n_iterations` belong to the run and repeat across
/// the schemes applied to it. Metrics without a reference are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub experiment: String,
    pub strategy: String,
    /// Schedule parameter; NaN for adaptive schedules.
    #[serde(with = "json_float")]
    pub gamma: f64,
    pub replicate: usize,
    pub seed: u64,
    pub scheme: String,
    pub ok: bool,
    /// Why the run or the estimator failed; empty when `ok`.
    pub error: String,
    pub n_iterations: usize,
    #[serde(with = "json_float")]
    pub log_evidence: f64,
    /// Squared Euclidean error of the posterior-mean estimate.
    #[serde(with = "json_float")]
    pub sq_error: f64,
    #[serde(with = "json_float")]
    pub ks: f64,
    #[serde(with = "json_float")]
    pub pooled_ess: f64,
    #[serde(with = "json_float")]
    pub wall_clock_s: f64,
}

impl ReplicateRow {
    /// Every field except the timing.
    pub fn same_result(&self, other: &ReplicateRow) -> bool {
        let eq = |a: f64, b: f64| a.to_bits() == b.to_bits();
        self.experiment == other.experiment
            && self.strategy == other.strategy
            && eq(self.gamma, other.gamma)
            && self.replicate == other.replicate
            && self.seed == other.seed
            && self.scheme == other.scheme
            && self.ok == other.ok
            && self.error == other.error
            && self.n_iterations == other.n_iterations
            && eq(self.log_evidence, other.log_evidence)
            && eq(self.sq_error, other.sq_error)
            && eq(self.ks, other.ks)
            && eq(self.pooled_ess, other.pooled_ess)
    }
}

/// Aggregate over the successful replicates of one (strategy, scheme) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub strategy: String,
    #[serde(with = "json_float")]
    pub gamma: f64,
    pub scheme: String,
    pub n_ok: usize,
    pub n_failed: usize,
    #[serde(with = "json_float")]
    pub log_evidence_mean: f64,
    /// Unbiased sample variance.
    #[serde(with = "json_float")]
    pub log_evidence_var: f64,
    #[serde(with = "json_float")]
    pub mse: f64,
    #[serde(with = "json_float")]
    pub ks_mean: f64,
    #[serde(with = "json_float")]
    pub ks_std: f64,
    #[serde(with = "json_float")]
    pub pooled_ess_mean: f64,
    #[serde(with = "json_float")]
    pub wall_clock_mean_s: f64,
}

/// Mean and unbiased variance; NaN where undefined.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var)
}

/// Groups rows by (strategy, scheme) in order of first appearance.
pub fn summarize(rows: &[ReplicateRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in rows {
        let k = (r.strategy.as_str(), r.scheme.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(strategy, scheme)| {
            let group: Vec<&ReplicateRow> = rows
                .iter()
                .filter(|r| r.strategy == strategy && r.scheme == scheme)
                .collect();
            let ok: Vec<&ReplicateRow> = group.iter().copied().filter(|r| r.ok).collect();
            let col = |f: fn(&ReplicateRow) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (lz_mean, lz_var) = mean_var(&col(|r| r.log_evidence));
            let (ks_mean, ks_var) = mean_var(&col(|r| r.ks));
            SummaryRow {
                experiment: group[0].experiment.clone(),
                strategy: strategy.to_string(),
                gamma: group[0].gamma,
                scheme: scheme.to_string(),
                n_ok: ok.len(),
                n_failed: group.len() - ok.len(),
                log_evidence_mean: lz_mean,
                log_evidence_var: lz_var,
                mse: mean_var(&col(|r| r.sq_error)).0,
                ks_mean,
                ks_std: ks_var.sqrt(),
                pooled_ess_mean: mean_var(&col(|r| r.pooled_ess)).0,
                wall_clock_mean_s: mean_var(&col(|r| r.wall_clock_s)).0,
            }
        })
        .collect()
}
