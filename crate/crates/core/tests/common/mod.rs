#![allow(dead_code)]

use smc_anneal::models::{BlockPartition, GaussianLinearModel, MODEL1_SEED};
use smc_anneal::numutil::Gaussian;
use smc_anneal::rng::SmcRng;
use smc_anneal::TemperedModel;

pub fn model1() -> GaussianLinearModel {
    GaussianLinearModel::benchmark(10, 20, MODEL1_SEED).unwrap()
}

pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Standard normal prior with a likelihood that is identically one.
pub struct FlatLikelihood {
    blocks: BlockPartition,
}

impl FlatLikelihood {
    pub fn new(dim: usize) -> Self {
        Self {
            blocks: BlockPartition::single(dim).unwrap(),
        }
    }
}

impl TemperedModel for FlatLikelihood {
    fn dim(&self) -> usize {
        self.blocks.dim()
    }
    fn blocks(&self) -> &BlockPartition {
        &self.blocks
    }
    fn log_prior(&self, theta: &[f64]) -> f64 {
        Gaussian::standard(theta.len()).factor().unwrap().log_pdf(theta)
    }
    fn log_likelihood(&self, _theta: &[f64]) -> f64 {
        0.0
    }
    fn sample_prior(&self, rng: &mut SmcRng) -> Vec<f64> {
        use rand::Rng;
        (0..self.dim()).map(|_| rng.sample(rand_distr::StandardNormal)).collect()
    }
}
