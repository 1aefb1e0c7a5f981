//! Recycled posterior estimates against closed forms.

use smc_anneal::models::GaussianLinearModel;
use smc_anneal::recycle::{
    ess_correction_weights, recycled_estimate_ess, recycled_sample, uniformize, uniformize_with, LambdaRule,
    RecycleScheme,
};
use smc_anneal::smc::posterior_expectation;
use smc_anneal::{parametric_schedule, smc_run, KernelConfig, SmcConfig};

mod common;
use common::{mean_var, model1};

#[test]
fn uniformizing_keeps_cloud_moments() {
    let m = GaussianLinearModel::scalar_example();
    // no resampling, so every stored cloud after the first is weighted
    let mut cfg = SmcConfig::new(20_000, parametric_schedule(1.0, 4).unwrap(), KernelConfig::PerfectGaussian, 21);
    cfg.ess_threshold = 1e-6;
    let trace = smc_run(&m, &cfg).unwrap();
    let hist = uniformize_with(&trace, 5);
    assert!(hist.reused[0]);
    for t in 1..trace.len() {
        assert!(!hist.reused[t]);
        let weighted = trace.clouds[t].expectation(|x| vec![x[0]])[0];
        let pts: Vec<f64> = hist.points[t].iter().map(|p| p[0]).collect();
        let (mu, var) = mean_var(&pts);
        let se = (var / pts.len() as f64).sqrt();
        assert!((mu - weighted).abs() < 4.0 * se, "iteration {t}: {mu} vs {weighted}");
    }
}

#[test]
fn correction_weights_at_the_posterior_reproduce_the_final_cloud() {
    let m = model1();
    let cfg = SmcConfig::new(500, parametric_schedule(3.0, 8).unwrap(), KernelConfig::default(), 22);
    let trace = smc_run(&m, &cfg).unwrap();
    let hist = uniformize(&trace);
    let last = hist.len() - 1;
    assert!(ess_correction_weights(&hist, last).iter().all(|&w| w == 0.0));
    let only_last = recycled_estimate_ess(&hist, |x| x.to_vec(), LambdaRule::Optimal, &[last]).unwrap();
    let direct: Vec<f64> = {
        let pts = &hist.points[last];
        (0..10)
            .map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / pts.len() as f64)
            .collect()
    };
    for k in 0..10 {
        assert!((only_last[k] - direct[k]).abs() < 1e-12);
    }
    // same target, so close to the weighted final-cloud estimate as well
    let fin = posterior_expectation(&trace, |x| x.to_vec());
    let post = m.gauss_posterior().unwrap();
    for k in 0..10 {
        assert!((only_last[k] - fin[k]).abs() < 6.0 * (post.cov[(k, k)] / 500.0).sqrt());
    }
}

#[test]
fn recycled_means_match_the_posterior() {
    let m = model1();
    let post = m.gauss_posterior().unwrap();
    let reps = 20;
    let mut est = [vec![], vec![]];
    for r in 0..reps {
        let cfg = SmcConfig::new(10_000, parametric_schedule(3.0, 25).unwrap(), KernelConfig::PerfectGaussian, 300 + r);
        let trace = smc_run(&m, &cfg).unwrap();
        let hist = uniformize(&trace);
        for (slot, scheme) in [RecycleScheme::Ess, RecycleScheme::Demix].into_iter().enumerate() {
            est[slot].push(recycled_sample(&trace, &hist, scheme).unwrap().mean());
        }
    }
    for (slot, name) in ["ess", "demix"].into_iter().enumerate() {
        for k in 0..10 {
            let vals: Vec<f64> = est[slot].iter().map(|e| e[k]).collect();
            let (mu, var) = mean_var(&vals);
            let se = (var / reps as f64).sqrt();
            assert!(
                (mu - post.mean[k]).abs() <= 4.0 * se,
                "{name} coordinate {k}: {mu} vs {} (SE {se})",
                post.mean[k]
            );
        }
    }
}
