use serde::{Deserialize, Serialize};

use crate::numutil::WeightedSample;

/// Particles targeting one tempered distribution, with cached log-likelihoods
/// so that reweighting and recycling never re-evaluate the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleCloud {
    pub positions: Vec<Vec<f64>>,
    /// Normalized: log-sum-exp is zero.
    #[serde(with = "extended_floats")]
    pub log_weights: Vec<f64>,
    #[serde(with = "extended_floats")]
    pub log_likelihoods: Vec<f64>,
    pub phi: f64,
    /// Zero-based position in the run.
    pub iteration: usize,
}

impl ParticleCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    pub fn ess(&self) -> f64 {
        super::ess(&self.log_weights)
    }

    /// True when every weight is exactly `1/N` in log space.
    pub fn is_uniform(&self) -> bool {
        self.log_weights.windows(2).all(|w| w[0] == w[1])
    }

    pub fn weighted_sample(&self) -> WeightedSample {
        WeightedSample {
            points: self.positions.clone(),
            log_weights: self.log_weights.clone(),
        }
    }

    /// `Σ W f(θ)` over this cloud.
    pub fn expectation<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        self.weighted_sample().expectation(f)
    }
}

/// Serializes `f64` lists with `±inf`/`NaN` written as strings, since JSON
/// has no literal for them and log-weights are routinely `-inf`.
pub(crate) mod extended_floats {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn encode(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else if v.is_nan() {
            Repr::Text("nan".into())
        } else if v > 0.0 {
            Repr::Text("inf".into())
        } else {
            Repr::Text("-inf".into())
        }
    }

    fn decode<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("not a number: {other:?}"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(values.iter().map(|&v| encode(v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?.into_iter().map(decode).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_keeps_infinite_weights() {
        let c = ParticleCloud {
            positions: vec![vec![1.0], vec![2.0]],
            log_weights: vec![0.0, f64::NEG_INFINITY],
            log_likelihoods: vec![-3.5, f64::NEG_INFINITY],
            phi: 0.25,
            iteration: 3,
        };
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"-inf\""));
        let back: ParticleCloud = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert!(!c.is_uniform());
        assert_eq!(c.ess(), 1.0);
    }
}
