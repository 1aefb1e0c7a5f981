use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use smc_anneal::schedule::{approximate_sequence, optimize_gamma, ScheduleStrategy};
use smc_anneal::{parametric_schedule, AnyModel, ApproxMethod, TemperedModel};
use smc_anneal_harness::config::{default_approximation, load_model, ExperimentConfig, GridSpec};
use smc_anneal_harness::emit::{self, Format};
use smc_anneal_harness::truth::grid_marginal_cdf;
use smc_anneal_harness::{run_experiment, HarnessError, Result};

#[derive(Parser)]
#[command(name = "smc-anneal", version, about = "Tempered SMC experiments and oracles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write summary and per-replicate tables.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for the replicate pool.
        #[arg(long)]
        threads: Option<usize>,
        /// Root seed (overrides the config's `seed`).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
        format: OutFormat,
    },
    /// Print the variance-optimal parametric schedule as JSON.
    Schedule {
        /// Model JSON file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "T")]
        t: usize,
        /// Gaussian approximation as JSON, e.g. '{"method":"laplace"}'.
        #[arg(long)]
        approx: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print closed-form or grid reference values for a model.
    Truth {
        #[arg(long)]
        model: PathBuf,
        /// Coordinate of the tabulated marginal (2-D models).
        #[arg(long, default_value_t = 0)]
        axis: usize,
        #[arg(long, default_value_t = 2000)]
        resolution: usize,
        #[arg(long, default_value_t = -15.0, allow_hyphen_values = true)]
        lower: f64,
        #[arg(long, default_value_t = 15.0, allow_hyphen_values = true)]
        upper: f64,
        /// Also write the tabulated marginal CDF to this CSV file.
        #[arg(long)]
        cdf: Option<PathBuf>,
    },
    /// Write the model instance described by a config file as JSON.
    Model {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run {
            config,
            out,
            threads,
            seed,
            format,
        } => run(config, out, threads, seed, format),
        Command::Schedule { model, t, approx, seed } => schedule(model, t, approx, seed),
        Command::Truth {
            model,
            axis,
            resolution,
            lower,
            upper,
            cdf,
        } => truth(
            model,
            axis,
            GridSpec {
                lower,
                upper,
                resolution,
                ..GridSpec::default()
            },
            cdf,
        ),
        Command::Model { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("{}", cfg.model.build()?.to_json()?);
            Ok(())
        }
    }
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    let Some(k) = threads else { return Ok(()) };
    if k == 0 {
        return Err(HarnessError::Config("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| HarnessError::Config(format!("cannot size the thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    eprintln!("note: built without the `parallel` feature, ignoring --threads {k}");
    Ok(())
}

fn run(config: PathBuf, out: Option<PathBuf>, threads: Option<usize>, seed: Option<u64>, format: OutFormat) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    set_threads(threads)?;
    let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("results"));
    let res = run_experiment(&cfg)?;
    let fmt = match format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    let (sp, rp) = emit::emit(&dir, &cfg.id, &res.summary, &res.replicates, fmt)?;
    let mp = dir.join(format!("{}_meta.json", cfg.id));
    emit::write_text(&mp, &emit::to_json(&res.meta)?)?;

    for s in &res.summary {
        println!(
            "{:<16} {:<6} ok={:<4} logZ mean={:.6} var={:.6e} mse={:.6e} ks={:.5}",
            s.strategy, s.scheme, s.n_ok, s.log_evidence_mean, s.log_evidence_var, s.mse, s.ks_mean
        );
    }
    let failed: usize = res.summary.iter().map(|s| s.n_failed).sum();
    if failed > 0 {
        eprintln!("warning: {failed} replicate rows failed and were left out of the summary");
    }
    println!("wrote {}, {} and {}", sp.display(), rp.display(), mp.display());
    Ok(())
}

fn schedule(model: PathBuf, t: usize, approx: Option<String>, seed: u64) -> Result<()> {
    let model = load_model(&model)?;
    let method: ApproxMethod = match approx {
        Some(s) => serde_json::from_str(&s)?,
        None => default_approximation(&model),
    };
    let seq = approximate_sequence(&model, &method, seed)?;
    let opt = optimize_gamma(&seq, t)?;
    let sched = parametric_schedule(opt.gamma, t)?.with_strategy(ScheduleStrategy::Optimal { gamma: opt.gamma });
    println!("{}", sched.to_json()?);
    eprintln!(
        "gamma = {:.6}, asymptotic variance = {:.6e}, clipped eigenvalues = {}",
        opt.gamma,
        opt.variance,
        seq.clipped_eigenvalues()
    );
    Ok(())
}

fn truth(model: PathBuf, axis: usize, grid: GridSpec, cdf_out: Option<PathBuf>) -> Result<()> {
    let model = load_model(&model)?;
    let report = match &model {
        AnyModel::GaussianLinear(m) => {
            let post = m.gauss_posterior()?;
            let rows: Vec<Vec<f64>> = (0..post.dim())
                .map(|i| post.cov.row(i).iter().copied().collect())
                .collect();
            json!({
                "model": model.kind(),
                "method": "analytic",
                "log_evidence": m.gauss_log_evidence()?,
                "posterior_mean": post.mean.as_slice(),
                "posterior_cov": rows,
            })
        }
        _ if model.dim() == 2 => {
            let g = grid_marginal_cdf(&model, axis, &grid)?;
            if let Some(path) = &cdf_out {
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(["x", "cdf"])?;
                for (x, f) in g.cdf.nodes().iter().zip(g.cdf.values()) {
                    w.write_record([emit::format_float(*x), emit::format_float(*f)])?;
                }
                w.flush().map_err(|e| HarnessError::io(path, e))?;
            }
            let qs = [0.05, 0.25, 0.5, 0.75, 0.95];
            json!({
                "model": model.kind(),
                "method": "grid",
                "grid": { "lower": grid.lower, "upper": grid.upper, "resolution": grid.resolution },
                "log_evidence": g.log_evidence,
                "mass_ratio": g.mass_ratio,
                "posterior_mean": g.posterior_mean,
                "axis": axis,
                "quantiles": qs.iter().map(|&p| json!({"p": p, "x": g.cdf.quantile(p)})).collect::<Vec<_>>(),
            })
        }
        _ => {
            return Err(HarnessError::Config(format!(
                "no reference oracle for a {}-dimensional {} model",
                model.dim(),
                model.kind()
            )))
        }
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
