use smc_anneal::recycle::RecycleScheme;
use smc_anneal::{Execution, KernelConfig};
use smc_anneal_harness::config::SCHEMA_VERSION;
use smc_anneal_harness::{run_experiment, ExperimentConfig, ModelSpec, StrategySpec, TruthSpec};

fn config(model: ModelSpec, n: usize, t: usize, reps: usize) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        id: "test".into(),
        model,
        n_particles: n,
        n_iterations: t,
        strategies: vec![StrategySpec::Optimal],
        kernel: KernelConfig::default(),
        ess_threshold: 0.5,
        recycling: Vec::new(),
        replicates: reps,
        seed: 40,
        approximation: None,
        truth: None,
        execution: Execution::Parallel,
        output: None,
    }
}

fn scalar() -> ModelSpec {
    ModelSpec::GaussianScalar
}

#[test]
fn single_replicate_is_deterministic() {
    let mut cfg = config(scalar(), 100, 10, 1);
    cfg.recycling = vec![RecycleScheme::Ess, RecycleScheme::Demix];
    cfg.truth = Some(TruthSpec::default());
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.replicates.len(), 3);
    for (x, y) in a.replicates.iter().zip(&b.replicates) {
        assert!(x.same_result(y), "{x:?} vs {y:?}");
        assert!(x.ok && x.ks.is_finite() && x.sq_error.is_finite());
    }
    let json = |r: &smc_anneal_harness::ExperimentResult| smc_anneal_harness::emit::to_json(&r.meta).unwrap();
    assert_eq!(json(&a), json(&b));
}

#[test]
fn execution_mode_does_not_change_results() {
    let mut cfg = config(scalar(), 50, 8, 4);
    let par = run_experiment(&cfg).unwrap();
    cfg.execution = Execution::Sequential;
    let seq = run_experiment(&cfg).unwrap();
    for (x, y) in par.replicates.iter().zip(&seq.replicates) {
        assert!(x.same_result(y));
    }
}

#[test]
fn strategies_share_replicate_seeds() {
    let mut cfg = config(scalar(), 50, 8, 5);
    cfg.strategies = vec![StrategySpec::Optimal, StrategySpec::Linear, StrategySpec::Parametric { gamma: 3.0 }];
    let res = run_experiment(&cfg).unwrap();
    let expected: Vec<u64> = (41..46).collect();
    assert_eq!(res.meta.seeds, expected);
    for label in ["optimal", "linear", "parametric:3"] {
        let seeds: Vec<u64> = res.replicates.iter().filter(|r| r.strategy == label).map(|r| r.seed).collect();
        assert_eq!(seeds, expected, "{label}");
    }
    assert_eq!(res.summary.len(), 3);
}

#[test]
fn perfect_kernel_variance_shrinks_like_one_over_n() {
    let mut cfg = config(scalar(), 100, 10, 400);
    cfg.kernel = KernelConfig::PerfectGaussian;
    cfg.ess_threshold = 1.0;
    let small = run_experiment(&cfg).unwrap().summary[0].log_evidence_var;
    cfg.n_particles = 200;
    let large = run_experiment(&cfg).unwrap().summary[0].log_evidence_var;
    // each variance carries about 7% relative sampling error
    let ratio = small / large;
    assert!((1.5..=2.6).contains(&ratio), "variance ratio {ratio}");
}

#[test]
fn cess_runs_report_their_length() {
    let mut cfg = config(scalar(), 100, 2, 2);
    cfg.strategies = vec![StrategySpec::Cess { target: 0.9 }];
    let res = run_experiment(&cfg).unwrap();
    assert!(res.meta.optimal_gamma.is_nan());
    for r in &res.replicates {
        assert!(r.ok && r.n_iterations >= 2 && r.gamma.is_nan());
    }
}

#[test]
fn invalid_configs_are_config_errors() {
    let mut cfg = config(scalar(), 100, 10, 0);
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    cfg.replicates = 1;
    cfg.truth = Some(TruthSpec {
        mean: Some(vec![0.0, 0.0]),
        ..TruthSpec::default()
    });
    assert_eq!(run_experiment(&cfg).unwrap_err().exit_code(), 2);
}
