//! Cooling schedules: linear, parametric-exponential, CESS-driven, and the
//! variance-optimal member of the parametric family.

mod approx;
mod cess;
mod variance;

pub use approx::{approximate_sequence, ApproxMethod, GaussianSequence};
pub use cess::cess_next_phi;
pub use variance::{asymptotic_variance, optimize_gamma, variance_profile, GammaOptimum};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a schedule was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleStrategy {
    Linear,
    Parametric { gamma: f64 },
    /// Chosen online; `target` is the CESS as a fraction of N.
    Cess { target: f64 },
    /// Parametric at the variance-minimizing `gamma`.
    Optimal { gamma: f64 },
    Custom,
}

/// Temperatures `0 = φ_1 ≤ … ≤ φ_T = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct CoolingSchedule {
    phis: Vec<f64>,
    strategy: ScheduleStrategy,
}

#[derive(Serialize, Deserialize)]
struct ScheduleRepr {
    strategy: ScheduleStrategy,
    phis: Vec<f64>,
}

impl TryFrom<ScheduleRepr> for CoolingSchedule {
    type Error = Error;
    fn try_from(r: ScheduleRepr) -> Result<Self> {
        CoolingSchedule::new(r.phis, r.strategy)
    }
}

impl From<CoolingSchedule> for ScheduleRepr {
    fn from(s: CoolingSchedule) -> Self {
        ScheduleRepr {
            strategy: s.strategy,
            phis: s.phis,
        }
    }
}

impl CoolingSchedule {
    pub fn new(phis: Vec<f64>, strategy: ScheduleStrategy) -> Result<Self> {
        if phis.len() < 2 {
            return Err(Error::usage("a schedule needs at least two temperatures"));
        }
        if phis[0] != 0.0 || phis[phis.len() - 1] != 1.0 {
            return Err(Error::usage("a schedule must start at 0 and end at 1"));
        }
        if phis.iter().any(|p| !(0.0..=1.0).contains(p)) || phis.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::usage("temperatures must be non-decreasing within [0, 1]"));
        }
        Ok(Self { phis, strategy })
    }

    pub fn linear(t: usize) -> Result<Self> {
        let mut s = parametric_schedule(0.0, t)?;
        s.strategy = ScheduleStrategy::Linear;
        Ok(s)
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    pub fn strategy(&self) -> ScheduleStrategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.phis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phis.is_empty()
    }

    pub fn with_strategy(mut self, strategy: ScheduleStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `φ_t = (exp(γ s_t) − 1) / (exp(γ) − 1)` with `s_t = (t−1)/(T−1)`; the
/// linear limit for `|γ| < 1e-8`.
pub fn parametric_schedule(gamma: f64, t: usize) -> Result<CoolingSchedule> {
    if t < 2 {
        return Err(Error::usage("T must be at least 2"));
    }
    if !gamma.is_finite() {
        return Err(Error::usage(format!("gamma must be finite, got {gamma}")));
    }
    let last = (t - 1) as f64;
    let mut phis: Vec<f64> = (0..t)
        .map(|i| {
            let s = i as f64 / last;
            if gamma.abs() < 1e-8 {
                s
            } else if gamma > 0.0 {
                // divide through by exp(γ) so nothing overflows
                (gamma * (s - 1.0)).exp() * (-(-gamma * s).exp_m1()) / (-(-gamma).exp_m1())
            } else {
                (gamma * s).exp_m1() / gamma.exp_m1()
            }
        })
        .collect();
    phis[0] = 0.0;
    phis[t - 1] = 1.0;
    for i in 1..t {
        phis[i] = phis[i].clamp(phis[i - 1], 1.0);
    }
    CoolingSchedule::new(phis, ScheduleStrategy::Parametric { gamma })
}
