//! Reference posteriors: tabulated marginal CDFs and the KS distance.

use smc_anneal::exec::{map_indexed, Execution};
use smc_anneal::numutil::{logsumexp, WeightedSample};
use smc_anneal::rng::{stream, StreamTag};
use smc_anneal::TemperedModel;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::GridSpec;
use crate::error::{HarnessError, Result};

/// Seed of the prior draws behind the grid mass check.
const MASS_CHECK_SEED: u64 = 0x6d61_7373;

/// A CDF tabulated on increasing nodes and interpolated linearly between
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCdf {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl GridCdf {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(HarnessError::config("a tabulated CDF needs two or more matching nodes and values"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || values.windows(2).any(|w| w[1] < w[0]) {
            return Err(HarnessError::config("CDF nodes must increase and values must not decrease"));
        }
        Ok(Self { nodes, values })
    }

    /// Tabulates `f` on `n` evenly spaced nodes over `[lower, upper]`.
    pub fn from_fn(lower: f64, upper: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let nodes = linspace(lower, upper, n);
        let values = nodes.iter().map(|&x| f(x)).collect();
        Self::new(nodes, values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Constant beyond the end nodes.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return self.values[0];
        }
        if x >= self.nodes[n - 1] {
            return self.values[n - 1];
        }
        let k = self.nodes.partition_point(|&v| v <= x);
        let (x0, x1) = (self.nodes[k - 1], self.nodes[k]);
        let (f0, f1) = (self.values[k - 1], self.values[k]);
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }

    /// Smallest `x` with `F(x) >= p` under linear interpolation.
    pub fn quantile(&self, p: f64) -> f64 {
        let k = self.values.partition_point(|&v| v < p);
        if k == 0 {
            return self.nodes[0];
        }
        if k == self.values.len() {
            return self.nodes[k - 1];
        }
        let (f0, f1) = (self.values[k - 1], self.values[k]);
        let (x0, x1) = (self.nodes[k - 1], self.nodes[k]);
        if f1 == f0 {
            x0
        } else {
            x0 + (x1 - x0) * (p - f0) / (f1 - f0)
        }
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Largest absolute difference to `other`, on the union of both node
    /// sets.
    pub fn sup_distance(&self, other: &GridCdf) -> f64 {
        self.nodes
            .iter()
            .chain(other.nodes.iter())
            .map(|&x| (self.eval(x) - other.eval(x)).abs())
            .fold(0.0, f64::max)
    }
}

fn linspace(lower: f64, upper: f64, n: usize) -> Vec<f64> {
    let h = (upper - lower) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { upper } else { lower + h * i as f64 })
        .collect()
}

/// Marginal CDF of one coordinate of a two-dimensional posterior, plus the
/// by-products of the same quadrature.
#[derive(Debug, Clone)]
pub struct GridTruth {
    pub axis: usize,
    pub cdf: GridCdf,
    pub posterior_mean: Vec<f64>,
    /// Trapezoid estimate of `log p(y)` over the grid.
    pub log_evidence: f64,
    /// Grid evidence over the importance-sampling evidence (NaN when the
    /// check was skipped).
    pub mass_ratio: f64,
}

/// Integrates the unnormalized posterior of a 2-D model with the trapezoid
/// rule over `[lower, upper]²`.
///
/// Fails when the grid evidence falls short of `0.999` times a
/// prior-importance-sampling estimate (less three standard errors), i.e.
/// when the box misses posterior mass.
pub fn grid_marginal_cdf<M: TemperedModel + ?Sized>(model: &M, axis: usize, grid: &GridSpec) -> Result<GridTruth> {
    if model.dim() != 2 {
        return Err(HarnessError::config(format!(
            "grid truth needs a two-dimensional model, got dimension {}",
            model.dim()
        )));
    }
    if axis > 1 {
        return Err(HarnessError::config(format!("axis {axis} out of range for a 2-D model")));
    }
    let n = grid.resolution;
    if n < 2 || !(grid.lower < grid.upper) {
        return Err(HarnessError::config("grid needs lower < upper and at least two nodes"));
    }
    let nodes = linspace(grid.lower, grid.upper, n);
    let h = (grid.upper - grid.lower) / (n - 1) as f64;
    let trap = |i: usize| if i == 0 || i + 1 == n { 0.5 * h } else { h };

    // rows[i][j] = log γ(x_i, x_j), with i along the first coordinate
    let rows: Vec<Vec<f64>> = map_indexed(Execution::Parallel, n, |i| {
        let mut theta = [nodes[i], 0.0];
        (0..n)
            .map(|j| {
                theta[1] = nodes[j];
                let lp = model.log_prior(&theta);
                let v = if lp > f64::NEG_INFINITY { lp + model.log_likelihood(&theta) } else { lp };
                if v.is_nan() { f64::NEG_INFINITY } else { v }
            })
            .collect()
    });
    let max = rows
        .iter()
        .flat_map(|r| r.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(HarnessError::Core(smc_anneal::Error::Numeric(
            "posterior density is not finite anywhere on the grid".into(),
        )));
    }

    // Scaled marginal densities along each axis.
    let mut dens = [vec![0.0; n], vec![0.0; n]];
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let e = (v - max).exp();
            dens[0][i] += trap(j) * e;
            dens[1][j] += trap(i) * e;
        }
    }
    let total: f64 = (0..n).map(|i| trap(i) * dens[0][i]).sum();
    let log_evidence = max + total.ln();
    let posterior_mean: Vec<f64> = dens
        .iter()
        .map(|d| (0..n).map(|i| trap(i) * nodes[i] * d[i]).sum::<f64>() / total)
        .collect();

    let d = &dens[axis];
    let mut values = vec![0.0; n];
    for k in 1..n {
        values[k] = values[k - 1] + 0.5 * h * (d[k - 1] + d[k]);
    }
    let last = values[n - 1];
    for v in &mut values {
        *v /= last;
    }

    let mut mass_ratio = f64::NAN;
    if grid.check_draws > 0 {
        let (log_z_is, rel_se) = prior_importance_evidence(model, grid.check_draws)?;
        mass_ratio = (log_evidence - log_z_is).exp();
        if mass_ratio < 0.999 - 3.0 * rel_se {
            return Err(HarnessError::BoundsTooSmall {
                grid: mass_ratio,
                reference: 1.0,
            });
        }
    }

    Ok(GridTruth {
        axis,
        cdf: GridCdf::new(nodes, values)?,
        posterior_mean,
        log_evidence,
        mass_ratio,
    })
}

/// `log p(y)` by averaging the likelihood over prior draws, with the
/// relative standard error of `p(y)`.
pub fn prior_importance_evidence<M: TemperedModel + ?Sized>(model: &M, n: usize) -> Result<(f64, f64)> {
    let ll: Vec<f64> = map_indexed(Execution::Parallel, n, |i| {
        let theta = model.sample_prior(&mut stream(MASS_CHECK_SEED, StreamTag::Auxiliary, 0, i));
        let v = model.log_likelihood(&theta);
        if v.is_nan() { f64::NEG_INFINITY } else { v }
    });
    let lse = logsumexp(&ll)?;
    let log_mean = lse - (n as f64).ln();
    // relative variance of the mean of exp(ll)
    let mean_sq: f64 = ll.iter().map(|&v| (2.0 * (v - log_mean)).exp()).sum::<f64>() / n as f64;
    let rel_se = ((mean_sq - 1.0).max(0.0) / n as f64).sqrt();
    Ok((log_mean, rel_se))
}

/// Tabulated `N(mean, sd²)` CDF over `mean ± 10 sd`.
pub fn normal_marginal_cdf(mean: f64, sd: f64, nodes: usize) -> Result<GridCdf> {
    let normal = Normal::new(mean, sd)
        .map_err(|e| HarnessError::config(format!("invalid normal marginal: {e}")))?;
    GridCdf::from_fn(mean - 10.0 * sd, mean + 10.0 * sd, nodes, |x| normal.cdf(x))
}

/// `sup |F_N − F|` over the truth's nodes and both one-sided limits at
/// every sample point. `weights` need not be normalized.
pub fn ks_distance(values: &[f64], weights: &[f64], truth: &GridCdf) -> Result<f64> {
    if values.is_empty() || values.len() != weights.len() {
        return Err(HarnessError::config("KS distance needs a non-empty sample with one weight per point"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(HarnessError::config("sample weights must have a positive finite sum"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let xs: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut cum = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    for &i in &order {
        acc += weights[i] / total;
        cum.push(acc);
    }
    // empirical CDF at x, right-continuous
    let emp = |x: f64| {
        let k = xs.partition_point(|&v| v <= x);
        if k == 0 { 0.0 } else { cum[k - 1] }
    };

    let mut d: f64 = 0.0;
    let mut k = 0;
    while k < xs.len() {
        let x = xs[k];
        let before = if k == 0 { 0.0 } else { cum[k - 1] };
        while k + 1 < xs.len() && xs[k + 1] == x {
            k += 1;
        }
        let f = truth.eval(x);
        d = d.max((before - f).abs()).max((cum[k] - f).abs());
        k += 1;
    }
    for (&x, &f) in truth.nodes.iter().zip(&truth.values) {
        d = d.max((emp(x) - f).abs());
    }
    Ok(d)
}

/// KS distance of the `axis` marginal of a weighted sample.
pub fn ks_weighted(sample: &WeightedSample, axis: usize, truth: &GridCdf) -> Result<f64> {
    let xs: Vec<f64> = sample.points.iter().map(|p| p[axis]).collect();
    ks_distance(&xs, &sample.weights(), truth)
}
