//! Seeded replicate runs over a set of schedules and estimators.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use smc_anneal::exec::{map_indexed, Execution};
use smc_anneal::recycle::{recycled_sample, uniformize, RecycleScheme};
use smc_anneal::schedule::{approximate_sequence, optimize_gamma, ScheduleStrategy};
use smc_anneal::smc::ResampleScheme;
use smc_anneal::{
    parametric_schedule, smc_run, AnyModel, ApproxMethod, CoolingSchedule, Error as CoreError, SmcConfig,
    Tempering,
};

use crate::config::{ExperimentConfig, StrategySpec};
use crate::emit::json_float;
use crate::error::Result;
use crate::metrics::{summarize, ReplicateRow, SummaryRow};
use crate::truth::{grid_marginal_cdf, ks_weighted, normal_marginal_cdf, GridCdf};

/// Upper bound on the length of CESS-driven runs.
pub const CESS_MAX_ITERS: usize = 10_000;

/// A strategy with its schedule resolved.
#[derive(Debug, Clone)]
pub struct PreparedStrategy {
    pub label: String,
    /// NaN for adaptive schedules.
    pub gamma: f64,
    pub tempering: Tempering,
}

/// Reference values the replicate metrics are scored against.
#[derive(Debug, Clone, Default)]
pub struct Reference {
    pub mean: Option<Vec<f64>>,
    pub cdf: Option<GridCdf>,
    pub axis: usize,
    pub log_evidence: Option<f64>,
    /// Grid evidence over the importance-sampling check, when a grid was
    /// integrated.
    pub grid_mass_ratio: Option<f64>,
}

/// Experiment-level facts written next to the metric tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMeta {
    pub id: String,
    pub model: String,
    pub dim: usize,
    pub approximation: Option<ApproxMethod>,
    #[serde(with = "json_float")]
    pub optimal_gamma: f64,
    /// Predicted `N · Var(log Ẑ)` at the optimal gamma.
    #[serde(with = "json_float")]
    pub optimal_asymptotic_variance: f64,
    pub clipped_eigenvalues: usize,
    #[serde(with = "json_float")]
    pub reference_log_evidence: f64,
    #[serde(with = "json_float")]
    pub grid_mass_ratio: f64,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub meta: ExperimentMeta,
    /// Sorted by strategy, then replicate, then scheme.
    pub replicates: Vec<ReplicateRow>,
    pub summary: Vec<SummaryRow>,
}

/// Seed of replicate `r` (counted from 0).
pub fn replicate_seed(root: u64, r: usize) -> u64 {
    root.wrapping_add(1 + r as u64)
}

struct Optimum {
    gamma: f64,
    variance: f64,
    clipped: usize,
    method: ApproxMethod,
}

/// Resolves every strategy to a tempering rule. The Gaussian fit behind
/// `optimal` is computed once, seeded by the root seed.
pub fn prepare_strategies(model: &AnyModel, cfg: &ExperimentConfig) -> Result<Vec<PreparedStrategy>> {
    Ok(prepare(model, cfg)?.0)
}

fn prepare(model: &AnyModel, cfg: &ExperimentConfig) -> Result<(Vec<PreparedStrategy>, Option<Optimum>)> {
    let t = cfg.n_iterations;
    let mut optimum: Option<Optimum> = None;
    let mut out = Vec::with_capacity(cfg.strategies.len());
    for s in &cfg.strategies {
        let (gamma, tempering) = match *s {
            StrategySpec::Linear => (0.0, fixed(CoolingSchedule::linear(t)?)),
            StrategySpec::Parametric { gamma } => (gamma, fixed(parametric_schedule(gamma, t)?)),
            StrategySpec::Optimal => {
                if optimum.is_none() {
                    let method = cfg.approximation_for(model);
                    let seq = approximate_sequence(model, &method, cfg.seed)?;
                    let opt = optimize_gamma(&seq, t)?;
                    optimum = Some(Optimum {
                        gamma: opt.gamma,
                        variance: opt.variance,
                        clipped: seq.clipped_eigenvalues(),
                        method,
                    });
                }
                let g = optimum.as_ref().map_or(f64::NAN, |o| o.gamma);
                let sched = parametric_schedule(g, t)?.with_strategy(ScheduleStrategy::Optimal { gamma: g });
                (g, fixed(sched))
            }
            StrategySpec::Cess { target } => (
                f64::NAN,
                Tempering::Cess {
                    target,
                    max_iters: CESS_MAX_ITERS,
                },
            ),
        };
        out.push(PreparedStrategy {
            label: s.label(),
            gamma,
            tempering,
        });
    }
    Ok((out, optimum))
}

fn fixed(schedule: CoolingSchedule) -> Tempering {
    Tempering::Fixed { schedule }
}

/// Closed forms for linear-Gaussian models; otherwise whatever the truth
/// section provides, with a grid-integrated CDF for 2-D models.
pub fn build_reference(model: &AnyModel, cfg: &ExperimentConfig) -> Result<Reference> {
    let truth = cfg.truth.clone();
    let axis = truth.as_ref().map_or(0, |t| t.axis);
    let mut r = Reference {
        axis,
        mean: truth.as_ref().and_then(|t| t.mean.clone()),
        ..Reference::default()
    };
    if let AnyModel::GaussianLinear(m) = model {
        let post = m.gauss_posterior()?;
        if r.mean.is_none() {
            r.mean = Some(post.mean.as_slice().to_vec());
        }
        r.log_evidence = Some(m.gauss_log_evidence()?);
        if truth.as_ref().is_some_and(|t| t.ks) {
            if axis >= post.dim() {
                return Err(crate::error::HarnessError::config(format!("truth axis {axis} out of range")));
            }
            r.cdf = Some(normal_marginal_cdf(post.mean[axis], post.cov[(axis, axis)].sqrt(), 20_001)?);
        }
    } else if let Some(t) = truth.as_ref().filter(|t| t.ks) {
        let g = grid_marginal_cdf(model, axis, &t.grid)?;
        r.grid_mass_ratio = Some(g.mass_ratio);
        r.log_evidence = Some(g.log_evidence);
        r.cdf = Some(g.cdf);
    }
    if let Some(m) = &r.mean {
        if m.len() != model_dim(model) {
            return Err(crate::error::HarnessError::config(format!(
                "true mean has {} entries for a {}-dimensional model",
                m.len(),
                model_dim(model)
            )));
        }
    }
    Ok(r)
}

fn model_dim(model: &AnyModel) -> usize {
    smc_anneal::TemperedModel::dim(model)
}

/// Runs every replicate under every strategy and scores every scheme.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let reference = build_reference(&model, cfg)?;
    run_with_reference(cfg, &model, &reference)
}

/// [`run_experiment`] with the model and reference supplied by the caller.
pub fn run_with_reference(cfg: &ExperimentConfig, model: &AnyModel, reference: &Reference) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (strategies, optimum) = prepare(model, cfg)?;
    let schemes = cfg.schemes();
    let reps = cfg.replicates;
    // One replicate per task; each run is sequential inside unless there
    // is a single replicate to spread.
    let inner = if reps == 1 { cfg.execution } else { Execution::Sequential };

    let per_rep: Vec<Result<Vec<Vec<ReplicateRow>>>> = map_indexed(cfg.execution, reps, |r| {
        strategies
            .iter()
            .map(|s| run_one(cfg, model, reference, s, &schemes, r, inner))
            .collect()
    });
    let mut by_rep = Vec::with_capacity(reps);
    for rows in per_rep {
        by_rep.push(rows?);
    }
    let mut replicates = Vec::with_capacity(reps * strategies.len() * schemes.len());
    for k in 0..strategies.len() {
        for rows in &by_rep {
            replicates.extend(rows[k].iter().cloned());
        }
    }
    let summary = summarize(&replicates);

    let meta = ExperimentMeta {
        id: cfg.id.clone(),
        model: model.kind().to_string(),
        dim: model_dim(model),
        approximation: optimum.as_ref().map(|o| o.method.clone()),
        optimal_gamma: optimum.as_ref().map_or(f64::NAN, |o| o.gamma),
        optimal_asymptotic_variance: optimum.as_ref().map_or(f64::NAN, |o| o.variance),
        clipped_eigenvalues: optimum.as_ref().map_or(0, |o| o.clipped),
        reference_log_evidence: reference.log_evidence.unwrap_or(f64::NAN),
        grid_mass_ratio: reference.grid_mass_ratio.unwrap_or(f64::NAN),
        seeds: (0..reps).map(|r| replicate_seed(cfg.seed, r)).collect(),
    };
    Ok(ExperimentResult {
        meta,
        replicates,
        summary,
    })
}

fn run_one(
    cfg: &ExperimentConfig,
    model: &AnyModel,
    reference: &Reference,
    strategy: &PreparedStrategy,
    schemes: &[RecycleScheme],
    r: usize,
    exec: Execution,
) -> Result<Vec<ReplicateRow>> {
    let seed = replicate_seed(cfg.seed, r);
    let smc_cfg = SmcConfig {
        n_particles: cfg.n_particles,
        ess_threshold: cfg.ess_threshold,
        tempering: strategy.tempering.clone(),
        kernel: cfg.kernel.clone(),
        resampling: ResampleScheme::Multinomial,
        seed,
        execution: exec,
    };
    let row = |scheme: RecycleScheme| ReplicateRow {
        experiment: cfg.id.clone(),
        strategy: strategy.label.clone(),
        gamma: strategy.gamma,
        replicate: r,
        seed,
        scheme: scheme.name().to_string(),
        ok: true,
        error: String::new(),
        n_iterations: 0,
        log_evidence: f64::NAN,
        sq_error: f64::NAN,
        ks: f64::NAN,
        pooled_ess: f64::NAN,
        wall_clock_s: f64::NAN,
    };

    let start = Instant::now();
    let trace = match smc_run(model, &smc_cfg) {
        Ok(t) => t,
        Err(e @ (CoreError::Aborted { .. } | CoreError::Numeric(_))) => {
            return Ok(schemes
                .iter()
                .map(|&s| ReplicateRow {
                    ok: false,
                    error: e.to_string(),
                    ..row(s)
                })
                .collect());
        }
        Err(e) => return Err(e.into()),
    };
    let run_time = start.elapsed().as_secs_f64();
    let log_evidence = trace.log_evidence();
    let hist = if schemes.iter().any(|&s| s != RecycleScheme::None) {
        Some(uniformize(&trace))
    } else {
        None
    };

    let mut rows = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let t0 = Instant::now();
        let mut out = ReplicateRow {
            n_iterations: trace.len(),
            log_evidence,
            ..row(scheme)
        };
        let sample = match &hist {
            Some(h) => recycled_sample(&trace, h, scheme),
            None => Ok(trace.final_cloud().weighted_sample()),
        };
        match sample {
            Ok(s) => {
                if let Some(truth) = &reference.mean {
                    out.sq_error = s.mean().iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum();
                }
                if let Some(cdf) = &reference.cdf {
                    out.ks = ks_weighted(&s, reference.axis, cdf)?;
                }
                out.pooled_ess = s.ess();
            }
            Err(e) => {
                out.ok = false;
                out.error = e.to_string();
            }
        }
        out.wall_clock_s = run_time + t0.elapsed().as_secs_f64();
        rows.push(out);
    }
    Ok(rows)
}
