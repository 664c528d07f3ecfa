//! Suboptimal reference decision rules, scored against the MAP bound.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::noise::{dot, NoiseModel};
use crate::scenario::ScenarioMean;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineRule {
    /// Nearest mean in Euclidean distance, ignoring the covariance.
    NearestMean,
    /// Always the given scenario.
    Constant(usize),
    /// Uniform guess, derived from a hash of the observation bits.
    CoinFlip,
    /// Scenario whose expected energy `‖μ‖² + tr Σ` is closest to `‖y‖²`.
    Energy,
}

impl BaselineRule {
    pub const ALL: [BaselineRule; 4] = [
        BaselineRule::NearestMean,
        BaselineRule::Constant(0),
        BaselineRule::CoinFlip,
        BaselineRule::Energy,
    ];

    pub fn name(&self) -> String {
        match self {
            BaselineRule::NearestMean => "nearest-mean".into(),
            BaselineRule::Constant(i) => format!("constant-{i}"),
            BaselineRule::CoinFlip => "coin-flip".into(),
            BaselineRule::Energy => "energy".into(),
        }
    }
}

impl FromStr for BaselineRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest-mean" => Ok(BaselineRule::NearestMean),
            "coin-flip" => Ok(BaselineRule::CoinFlip),
            "energy" => Ok(BaselineRule::Energy),
            "constant" => Ok(BaselineRule::Constant(0)),
            other => other
                .strip_prefix("constant-")
                .and_then(|i| i.parse().ok())
                .map(BaselineRule::Constant)
                .ok_or_else(|| Error::Config(format!("unknown estimator `{other}`"))),
        }
    }
}

/// A baseline rule bound to a scenario set.
#[derive(Debug, Clone)]
pub struct Baseline {
    rule: BaselineRule,
    means: Vec<Vec<f64>>,
    expected_energy: Vec<f64>,
}

impl Baseline {
    pub fn new(rule: BaselineRule, means: &[ScenarioMean], noise: &NoiseModel) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::EmptyScenarioSet);
        }
        if let BaselineRule::Constant(i) = rule {
            if i >= means.len() {
                return Err(Error::Config(format!(
                    "constant estimator index {i} out of range for {} scenarios",
                    means.len()
                )));
            }
        }
        let dim = means[0].len();
        let trace = match noise {
            NoiseModel::Isotropic { variance } => variance * dim as f64,
            NoiseModel::Full(f) => f.covariance().trace(),
        };
        Ok(Self {
            rule,
            means: means.iter().map(|m| m.mean.clone()).collect(),
            expected_energy: means.iter().map(|m| dot(&m.mean, &m.mean) + trace).collect(),
        })
    }

    pub fn rule(&self) -> BaselineRule {
        self.rule
    }

    pub fn decide(&self, y: &[f64]) -> usize {
        match self.rule {
            BaselineRule::Constant(i) => i,
            BaselineRule::CoinFlip => {
                let mut h = 0xcbf2_9ce4_8422_2325u64;
                for v in y {
                    h = (h ^ v.to_bits()).wrapping_mul(0x0100_0000_01b3);
                    h ^= h >> 29;
                }
                (h.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 32) as usize % self.means.len()
            }
            BaselineRule::NearestMean => argmin(self.means.iter().map(|m| {
                m.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            })),
            BaselineRule::Energy => {
                let energy = dot(y, y);
                argmin(self.expected_energy.iter().map(|e| (e - energy).abs()))
            }
        }
    }
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::INFINITY;
    for (i, v) in values.enumerate() {
        if v < best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        for rule in BaselineRule::ALL {
            assert_eq!(rule.name().parse::<BaselineRule>().unwrap(), rule);
        }
        assert_eq!("constant-2".parse::<BaselineRule>().unwrap(), BaselineRule::Constant(2));
        assert!("oracle".parse::<BaselineRule>().is_err());
    }

    #[test]
    fn decisions() {
        let means = [ScenarioMean::from(vec![0.0, 0.0]), ScenarioMean::from(vec![3.0, 4.0])];
        let noise = NoiseModel::isotropic(1.0).unwrap();
        let near = Baseline::new(BaselineRule::NearestMean, &means, &noise).unwrap();
        assert_eq!(near.decide(&[0.5, 0.5]), 0);
        assert_eq!(near.decide(&[2.0, 3.0]), 1);
        let energy = Baseline::new(BaselineRule::Energy, &means, &noise).unwrap();
        assert_eq!(energy.decide(&[0.1, 0.1]), 0);
        assert_eq!(energy.decide(&[-3.0, -4.0]), 1);
        let coin = Baseline::new(BaselineRule::CoinFlip, &means, &noise).unwrap();
        let heads = (0..1000).filter(|&i| coin.decide(&[i as f64, 0.5]) == 1).count();
        assert!((400..600).contains(&heads), "{heads}");
        assert!(Baseline::new(BaselineRule::Constant(2), &means, &noise).is_err());
    }
}
