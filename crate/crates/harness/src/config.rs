//! Experiment configuration, read from TOML or JSON.
//!
//! ```toml
//! schema_version = 1
//! id = "student-recycling"
//! n_particles = 200
//! n_iterations = 100
//! replicates = 100
//! seed = 7
//! recycling = ["none", "ess", "demix"]
//!
//! [model]
//! preset = "student_t"
//! dof = 0.2
//!
//! [[strategies]]
//! kind = "optimal"
//!
//! [kernel]
//! type = "mwg"
//! n_mcmc = 10
//!
//! [truth]
//! axis = 0
//! mean = [0.0, 0.0]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smc_anneal::models::{
    GaussianLinearModel, PoissonRegressionModel, StudentTModel, MODEL1_SEED, MODEL3_SEED,
};
use smc_anneal::recycle::RecycleScheme;
use smc_anneal::{AnyModel, ApproxMethod, Execution, KernelConfig};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Where the model instance comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Linear-Gaussian benchmark with a seeded random design.
    GaussianLinear {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_n_obs")]
        n_obs: usize,
        #[serde(default = "default_model1_seed")]
        seed: u64,
    },
    /// One-dimensional linear-Gaussian instance.
    GaussianScalar,
    /// Two-dimensional Student-t benchmark.
    StudentT { dof: f64 },
    /// Count regression with an exponential-power prior.
    PoissonRegression {
        #[serde(default = "default_poisson_n_obs")]
        n_obs: usize,
        #[serde(default = "default_model3_seed")]
        seed: u64,
    },
    /// A model JSON file, relative to the config file.
    File { path: PathBuf },
    Inline { model: AnyModel },
}

fn default_dim() -> usize {
    10
}
fn default_n_obs() -> usize {
    20
}
fn default_model1_seed() -> u64 {
    MODEL1_SEED
}
fn default_poisson_n_obs() -> usize {
    100
}
fn default_model3_seed() -> u64 {
    MODEL3_SEED
}

impl ModelSpec {
    pub fn build(&self) -> Result<AnyModel> {
        Ok(match self {
            ModelSpec::GaussianLinear { dim, n_obs, seed } => {
                AnyModel::GaussianLinear(GaussianLinearModel::benchmark(*dim, *n_obs, *seed)?)
            }
            ModelSpec::GaussianScalar => AnyModel::GaussianLinear(GaussianLinearModel::scalar_example()),
            ModelSpec::StudentT { dof } => AnyModel::StudentT(StudentTModel::benchmark(*dof)?),
            ModelSpec::PoissonRegression { n_obs, seed } => {
                AnyModel::PoissonRegression(PoissonRegressionModel::benchmark(*n_obs, *seed)?)
            }
            ModelSpec::File { path } => load_model(path)?,
            ModelSpec::Inline { model } => model.clone(),
        })
    }
}

/// Reads a model description written by [`AnyModel::to_json`].
pub fn load_model(path: &Path) -> Result<AnyModel> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(AnyModel::from_json(&text)?)
}

/// How the temperatures of each run are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawStrategy")]
pub enum StrategySpec {
    Linear,
    Parametric { gamma: f64 },
    /// Parametric at the gamma minimizing the asymptotic evidence variance.
    Optimal,
    /// Adaptive; the run length is emergent and `n_iterations` is unused.
    Cess { target: f64 },
}

/// Flat form of [`StrategySpec`] so that stray keys are rejected for
/// every kind, including the parameterless ones.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStrategy {
    kind: String,
    gamma: Option<f64>,
    target: Option<f64>,
}

impl TryFrom<RawStrategy> for StrategySpec {
    type Error = String;

    fn try_from(r: RawStrategy) -> std::result::Result<Self, String> {
        let spec = match (r.kind.as_str(), r.gamma, r.target) {
            ("linear", None, None) => StrategySpec::Linear,
            ("optimal", None, None) => StrategySpec::Optimal,
            ("parametric", Some(gamma), None) => StrategySpec::Parametric { gamma },
            ("cess", None, Some(target)) => StrategySpec::Cess { target },
            ("linear" | "optimal" | "parametric" | "cess", ..) => {
                return Err(format!(
                    "strategy `{}` takes {}",
                    r.kind,
                    match r.kind.as_str() {
                        "parametric" => "exactly `gamma`",
                        "cess" => "exactly `target`",
                        _ => "no parameters",
                    }
                ))
            }
            (other, ..) => return Err(format!("unknown strategy kind `{other}`")),
        };
        Ok(spec)
    }
}

impl StrategySpec {
    pub fn label(&self) -> String {
        match self {
            StrategySpec::Linear => "linear".into(),
            StrategySpec::Parametric { gamma } => format!("parametric:{gamma}"),
            StrategySpec::Optimal => "optimal".into(),
            StrategySpec::Cess { target } => format!("cess:{target}"),
        }
    }
}

/// Reference quantities the metrics are measured against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthSpec {
    /// Coordinate whose marginal CDF feeds the KS distance.
    pub axis: usize,
    /// Known posterior mean. Linear-Gaussian models use the closed form
    /// when this is absent.
    pub mean: Option<Vec<f64>>,
    /// Whether to tabulate a marginal CDF and report KS distances.
    pub ks: bool,
    pub grid: GridSpec,
}

impl Default for TruthSpec {
    fn default() -> Self {
        Self {
            axis: 0,
            mean: None,
            ks: true,
            grid: GridSpec::default(),
        }
    }
}

/// Square integration grid for two-dimensional posteriors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    /// Nodes per axis.
    pub resolution: usize,
    /// Prior draws behind the importance-sampling mass check.
    pub check_draws: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lower: -15.0,
            upper: 15.0,
            resolution: 2000,
            check_draws: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub id: String,
    pub model: ModelSpec,
    pub n_particles: usize,
    pub n_iterations: usize,
    pub strategies: Vec<StrategySpec>,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default = "default_ess_threshold")]
    pub ess_threshold: f64,
    /// Posterior estimators to score. The final cloud alone (`none`) is
    /// always included.
    #[serde(default)]
    pub recycling: Vec<RecycleScheme>,
    pub replicates: usize,
    /// Replicate `r` (from 0) runs with seed `seed + 1 + r` under every
    /// strategy.
    pub seed: u64,
    /// Gaussian fit behind the optimal schedule; a per-model default when
    /// absent.
    #[serde(default)]
    pub approximation: Option<ApproxMethod>,
    #[serde(default)]
    pub truth: Option<TruthSpec>,
    /// How replicates are spread over threads.
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_ess_threshold() -> f64 {
    0.5
}

impl ExperimentConfig {
    /// Parses a `.json` file as JSON and anything else as TOML. Relative
    /// model and output paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg = if is_json {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        if let ModelSpec::File { path: p } = &mut cfg.model {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(out) = &mut cfg.output {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(HarnessError::config(m));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.replicates == 0 {
            return fail("replicates must be at least 1".into());
        }
        if self.n_particles < 2 {
            return fail("n_particles must be at least 2".into());
        }
        if self.n_iterations < 2 {
            return fail("n_iterations must be at least 2".into());
        }
        if self.strategies.is_empty() {
            return fail("at least one strategy is required".into());
        }
        if !(self.ess_threshold > 0.0 && self.ess_threshold <= 1.0) {
            return fail(format!("ess_threshold must lie in (0, 1], got {}", self.ess_threshold));
        }
        for s in &self.strategies {
            match *s {
                StrategySpec::Parametric { gamma } if !gamma.is_finite() => {
                    return fail(format!("parametric gamma must be finite, got {gamma}"));
                }
                StrategySpec::Cess { target } if !(target > 0.0 && target <= 1.0) => {
                    return fail(format!("CESS target must lie in (0, 1], got {target}"));
                }
                _ => {}
            }
        }
        let labels: Vec<String> = self.strategies.iter().map(StrategySpec::label).collect();
        if (1..labels.len()).any(|i| labels[..i].contains(&labels[i])) {
            return fail("strategies must be distinct".into());
        }
        if let Some(t) = &self.truth {
            if t.grid.resolution < 2 || !(t.grid.lower < t.grid.upper) {
                return fail("truth grid needs lower < upper and at least two nodes".into());
            }
        }
        Ok(())
    }

    /// Schemes to score, `none` first and without duplicates.
    pub fn schemes(&self) -> Vec<RecycleScheme> {
        let mut out = vec![RecycleScheme::None];
        for s in &self.recycling {
            if !out.contains(s) {
                out.push(*s);
            }
        }
        out
    }

    pub fn approximation_for(&self, model: &AnyModel) -> ApproxMethod {
        self.approximation.clone().unwrap_or_else(|| default_approximation(model))
    }
}

/// Exact moments where available, prior importance sampling for the
/// Student-t model, and a pilot run for the count regression, whose
/// posterior is too far from the prior for plain importance sampling.
pub fn default_approximation(model: &AnyModel) -> ApproxMethod {
    match model {
        AnyModel::GaussianLinear(_) => ApproxMethod::Analytic,
        AnyModel::StudentT(_) => ApproxMethod::MomentMatch { n_draws: 10_000 },
        AnyModel::PoissonRegression(_) => ApproxMethod::Pilot {
            n_particles: 500,
            cess_target: 0.9,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
id = "t"
n_particles = 10
n_iterations = 5
replicates = 2
seed = 1
[model]
preset = "gaussian_scalar"
[[strategies]]
kind = "linear"
[[strategies]]
kind = "parametric"
gamma = 3.0
"#;

    #[test]
    fn minimal_toml_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.ess_threshold, 0.5);
        assert_eq!(cfg.kernel, KernelConfig::default());
        assert_eq!(cfg.schemes(), vec![RecycleScheme::None]);
        assert_eq!(cfg.strategies[1].label(), "parametric:3");
    }

    #[test]
    fn json_and_toml_agree() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }

    #[test]
    fn rejects_bad_values() {
        let bad_version = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(
            ExperimentConfig::from_toml(&bad_version),
            Err(HarnessError::Config(_))
        ));
        let no_reps = MINIMAL.replace("replicates = 2", "replicates = 0");
        assert!(ExperimentConfig::from_toml(&no_reps).is_err());
        let unknown = format!("{MINIMAL}\n[extra]\nx = 1\n");
        assert!(ExperimentConfig::from_toml(&unknown).is_err());
        let dup = format!("{MINIMAL}\n[[strategies]]\nkind = \"linear\"\n");
        assert!(ExperimentConfig::from_toml(&dup).is_err());
    }
}
