//! Seeded Monte-Carlo estimates of MAP success probabilities.
//!
//! Every estimator draws sample `i` from the counter-based stream `(seed, i)`
//! and merges integer tallies, so results are identical for any thread count.
//! Stream layout per sample: scenario-selecting estimators consume one
//! uniform first, then `T` standard normals.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{check_distinct, DiscretePrior, MapClassifier};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::rng::NormalStream;
use crate::scenario::ScenarioMean;
use crate::special::normal_quantile;

const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    #[serde(default = "default_confidence")]
    pub confidence_level: f64,
}

fn default_confidence() -> f64 {
    0.95
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Result<Self> {
        Self::with_confidence(samples, seed, default_confidence())
    }

    pub fn with_confidence(samples: u64, seed: u64, confidence_level: f64) -> Result<Self> {
        let cfg = Self {
            samples,
            seed,
            confidence_level,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidMcConfig("samples must be >= 1".into()));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(Error::InvalidMcConfig(format!(
                "confidence level must lie in (0, 1), got {}",
                self.confidence_level
            )));
        }
        Ok(())
    }
}

/// Binomial proportion estimate with a normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples_used: u64,
}

impl McEstimate {
    pub fn from_counts(successes: u64, trials: u64, confidence_level: f64) -> Self {
        if trials == 0 {
            return Self {
                value: 0.0,
                std_error: 0.0,
                ci_low: 0.0,
                ci_high: 1.0,
                samples_used: 0,
            };
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let std_error = (p * (1.0 - p) / n).sqrt();
        let z = normal_quantile(0.5 + 0.5 * confidence_level);
        Self {
            value: p,
            std_error,
            ci_low: (p - z * std_error).max(0.0),
            ci_high: (p + z * std_error).min(1.0),
            samples_used: trials,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }
}

/// Runs `body` for every sample index in parallel chunks and sums the
/// per-chunk tallies.
fn run_counts<S, I, F>(mc: &McConfig, buckets: usize, init: I, body: F) -> Vec<u64>
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &mut NormalStream, &mut [u64]) + Sync,
{
    let chunks = mc.samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut state = init();
            let mut stream = NormalStream::new(mc.seed);
            let mut counts = vec![0u64; buckets];
            let end = ((c + 1) * CHUNK).min(mc.samples);
            for index in c * CHUNK..end {
                stream.reset(index);
                body(&mut state, &mut stream, &mut counts);
            }
            counts
        })
        .reduce(
            || vec![0u64; buckets],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

fn check_dims(means: &[ScenarioMean], noise: &NoiseModel) -> Result<usize> {
    let dim = means.first().ok_or(Error::EmptyScenarioSet)?.len();
    for m in means {
        if m.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.len(),
            });
        }
    }
    noise.check_dim(dim)?;
    Ok(dim)
}

/// Inverse-CDF draw of a scenario index; zero-weight scenarios are skipped.
fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// `mean + L z` for the standard normals of stream `(seed, index)`.
pub fn sample_gaussian(mean: &[f64], noise: &NoiseModel, index: u64, seed: u64) -> Result<Vec<f64>> {
    noise.check_dim(mean.len())?;
    let mut stream = NormalStream::new(seed);
    stream.reset(index);
    let mut z = vec![0.0; mean.len()];
    stream.fill_normals(&mut z);
    let mut y = vec![0.0; mean.len()];
    noise.color_into(mean, &z, &mut y);
    Ok(y)
}

/// `P(A y + b > 0 componentwise)` for `y ~ N(mean, Σ)`. Samples exactly on a
/// boundary count as failures.
pub fn orthant_probability(
    rows: &DMatrix<f64>,
    offsets: &[f64],
    mean: &[f64],
    noise: &NoiseModel,
    mc: &McConfig,
) -> Result<McEstimate> {
    mc.validate()?;
    if rows.nrows() != offsets.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.nrows(),
            found: offsets.len(),
        });
    }
    if rows.ncols() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.ncols(),
            found: mean.len(),
        });
    }
    noise.check_dim(mean.len())?;
    let dim = mean.len();
    let counts = run_counts(
        mc,
        1,
        || (vec![0.0; dim], vec![0.0; dim]),
        |(z, y), stream, counts| {
            stream.fill_normals(z);
            noise.color_into(mean, z, y);
            let inside = rows.row_iter().zip(offsets).all(|(row, b)| {
                row.iter().zip(y.iter()).map(|(a, y)| a * y).sum::<f64>() + b > 0.0
            });
            if inside {
                counts[0] += 1;
            }
        },
    );
    Ok(McEstimate::from_counts(counts[0], mc.samples, mc.confidence_level))
}

/// Overall and per-scenario MAP success estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct NwayEstimate {
    pub overall: McEstimate,
    /// `P(MAP = i | u = i)` from the samples whose true scenario was `i`.
    pub conditional: Vec<McEstimate>,
}

/// Prior-weighted MAP success over `N` scenarios: draw the true scenario
/// from the prior, draw `y`, and classify.
pub fn nway_success_probability(
    means: &[ScenarioMean],
    prior: &DiscretePrior,
    noise: &NoiseModel,
    mc: &McConfig,
) -> Result<NwayEstimate> {
    mc.validate()?;
    if means.len() < 2 {
        return Err(Error::EmptyScenarioSet);
    }
    let dim = check_dims(means, noise)?;
    check_distinct(means)?;
    let classifier = MapClassifier::new(means, prior, noise)?;
    let n = means.len();
    let weights = prior.weights();
    let counts = run_counts(
        mc,
        2 * n,
        || (vec![0.0; dim], vec![0.0; dim]),
        |(z, yw), stream, counts| {
            let truth = pick(weights, stream.next_uniform());
            stream.fill_normals(z);
            // Whitened observation: L⁻¹(μ + L z) = L⁻¹μ + z.
            for ((o, m), zi) in yw.iter_mut().zip(&classifier.whitened_means()[truth]).zip(z.iter()) {
                *o = m + zi;
            }
            counts[2 * truth] += 1;
            if classifier.classify_whitened(yw) == truth {
                counts[2 * truth + 1] += 1;
            }
        },
    );
    let successes: u64 = (0..n).map(|i| counts[2 * i + 1]).sum();
    Ok(NwayEstimate {
        overall: McEstimate::from_counts(successes, mc.samples, mc.confidence_level),
        conditional: (0..n)
            .map(|i| McEstimate::from_counts(counts[2 * i + 1], counts[2 * i], mc.confidence_level))
            .collect(),
    })
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Success probability of the Bayes-optimal decision between two collections
/// of scenarios. The decision picks the collection with the larger posterior
/// mass `Σ p(v) f_v(y)`; exact ties go to the first collection.
///
/// `prior` covers the members of `first` followed by those of `second`.
pub fn collection_success_probability(
    first: &[ScenarioMean],
    second: &[ScenarioMean],
    prior: &DiscretePrior,
    noise: &NoiseModel,
    mc: &McConfig,
) -> Result<McEstimate> {
    mc.validate()?;
    if first.is_empty() || second.is_empty() {
        return Err(Error::EmptyCollection);
    }
    let members: Vec<ScenarioMean> = first.iter().chain(second).cloned().collect();
    let dim = check_dims(&members, noise)?;
    prior.check_len(members.len())?;
    let split = first.len();
    let whitened: Vec<Vec<f64>> = members.iter().map(|m| noise.whiten(&m.mean)).collect();
    let log_prior: Vec<f64> = prior.weights().iter().map(|w| w.ln()).collect();
    let weights = prior.weights();

    let counts = run_counts(
        mc,
        1,
        || (vec![0.0; dim], vec![0.0; dim], vec![0.0; whitened.len()]),
        |(z, yw, scores), stream, counts| {
            let truth = pick(weights, stream.next_uniform());
            stream.fill_normals(z);
            for ((o, m), zi) in yw.iter_mut().zip(&whitened[truth]).zip(z.iter()) {
                *o = m + zi;
            }
            for (s, (m, lp)) in scores.iter_mut().zip(whitened.iter().zip(&log_prior)) {
                *s = if *lp == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    let dist: f64 = yw.iter().zip(m).map(|(y, m)| (y - m) * (y - m)).sum();
                    lp - 0.5 * dist
                };
            }
            let mass_first = log_sum_exp(scores[..split].iter().copied());
            let mass_second = log_sum_exp(scores[split..].iter().copied());
            let decide_first = mass_first >= mass_second;
            if decide_first == (truth < split) {
                counts[0] += 1;
            }
        },
    );
    Ok(McEstimate::from_counts(counts[0], mc.samples, mc.confidence_level))
}

/// Empirical success rate of an arbitrary decision rule under the generative
/// model. By the MAP bound, no rule beats [`nway_success_probability`].
pub fn evaluate_estimator<D>(
    decision: D,
    means: &[ScenarioMean],
    prior: &DiscretePrior,
    noise: &NoiseModel,
    mc: &McConfig,
) -> Result<McEstimate>
where
    D: Fn(&[f64]) -> usize + Sync,
{
    mc.validate()?;
    let dim = check_dims(means, noise)?;
    prior.check_len(means.len())?;
    let weights = prior.weights();
    let counts = run_counts(
        mc,
        1,
        || (vec![0.0; dim], vec![0.0; dim]),
        |(z, y), stream, counts| {
            let truth = pick(weights, stream.next_uniform());
            stream.fill_normals(z);
            noise.color_into(&means[truth].mean, z, y);
            if decision(y) == truth {
                counts[0] += 1;
            }
        },
    );
    Ok(McEstimate::from_counts(counts[0], mc.samples, mc.confidence_level))
}
