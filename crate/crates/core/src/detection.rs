//! Closed-form detection under Gaussian noise with a shared covariance.
//!
//! Sign convention for two hypotheses: with `a = Σ⁻¹(μ₀ − μ₁)`, the MAP rule
//! decides `v₁` iff `aᵀy + b ≤ 0`, so the signed distance
//! `(aᵀy + b)/‖a‖` is positive on the `v₀` side.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::noise::{dot, sub, NoiseModel};
use crate::scenario::ScenarioMean;
use crate::special::{normal_cdf, normal_quantile};

const PRIOR_SUM_TOL: f64 = 1e-12;

/// Discrete prior over scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePrior {
    weights: Vec<f64>,
}

impl DiscretePrior {
    /// Weights must be nonnegative and sum to one within 1e-12.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidPrior("no weights".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidPrior(format!("negative or non-finite weight in {weights:?}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(Error::InvalidPrior(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self { weights })
    }

    /// Rescales nonnegative weights to sum to one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidPrior(format!("negative or non-finite weight in {weights:?}")));
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidPrior("weights sum to zero".into()));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPrior("no weights".into()));
        }
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.len(),
            });
        }
        Ok(())
    }
}

/// MAP decision boundary between two hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub a: Vec<f64>,
    pub b: f64,
    pub includes_prior_offset: bool,
}

impl Hyperplane {
    pub fn normal_norm(&self) -> f64 {
        dot(&self.a, &self.a).sqrt()
    }

    /// `(aᵀy + b) / ‖a‖`; positive on the `v₀` side.
    pub fn signed_distance(&self, y: &[f64]) -> f64 {
        (dot(&self.a, y) + self.b) / self.normal_norm()
    }

    /// True when the rule decides the second hypothesis `v₁`.
    pub fn decides_second(&self, y: &[f64]) -> bool {
        dot(&self.a, y) + self.b <= 0.0
    }
}

/// Gaussian law of the signed distance to a hyperplane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionStats {
    pub mean: f64,
    pub variance: f64,
}

impl ProjectionStats {
    /// Probability that the signed distance is positive.
    pub fn prob_positive(&self) -> f64 {
        normal_cdf(self.mean / self.variance.sqrt())
    }
}

fn check_pair(mean0: &ScenarioMean, mean1: &ScenarioMean, noise: &NoiseModel) -> Result<()> {
    if mean0.len() != mean1.len() {
        return Err(Error::DimensionMismatch {
            expected: mean0.len(),
            found: mean1.len(),
        });
    }
    noise.check_dim(mean0.len())
}

fn check_vec(expected: usize, y: &[f64]) -> Result<()> {
    if y.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: y.len(),
        });
    }
    Ok(())
}

/// `ln f₁(y) − ln f₀(y)`.
pub fn log_likelihood_ratio(
    y: &[f64],
    mean0: &ScenarioMean,
    mean1: &ScenarioMean,
    noise: &NoiseModel,
) -> Result<f64> {
    check_pair(mean0, mean1, noise)?;
    check_vec(mean0.len(), y)?;
    let q0 = noise.mahalanobis_sq(&sub(y, &mean0.mean));
    let q1 = noise.mahalanobis_sq(&sub(y, &mean1.mean));
    Ok(0.5 * (q0 - q1))
}

/// Precomputed MAP classifier: whitened means and log priors.
#[derive(Debug, Clone)]
pub struct MapClassifier {
    noise: NoiseModel,
    whitened_means: Vec<Vec<f64>>,
    log_prior: Vec<f64>,
    dim: usize,
}

impl MapClassifier {
    pub fn new(means: &[ScenarioMean], prior: &DiscretePrior, noise: &NoiseModel) -> Result<Self> {
        let first = means.first().ok_or(Error::EmptyScenarioSet)?;
        let dim = first.len();
        for m in means {
            check_vec(dim, &m.mean)?;
        }
        noise.check_dim(dim)?;
        prior.check_len(means.len())?;
        Ok(Self {
            noise: noise.clone(),
            whitened_means: means.iter().map(|m| noise.whiten(&m.mean)).collect(),
            log_prior: prior.weights().iter().map(|w| w.ln()).collect(),
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.whitened_means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.whitened_means.is_empty()
    }

    pub fn whitened_means(&self) -> &[Vec<f64>] {
        &self.whitened_means
    }

    pub fn log_prior(&self) -> &[f64] {
        &self.log_prior
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// MAP index for an observation in raw coordinates.
    pub fn classify(&self, y: &[f64]) -> usize {
        self.classify_whitened(&self.noise.whiten(y))
    }

    /// MAP index for an already whitened observation. Ties go to the lowest
    /// index; zero-prior scenarios are never chosen.
    pub fn classify_whitened(&self, yw: &[f64]) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, (m, lp)) in self.whitened_means.iter().zip(&self.log_prior).enumerate() {
            if *lp == f64::NEG_INFINITY {
                continue;
            }
            let dist: f64 = yw.iter().zip(m).map(|(y, m)| (y - m) * (y - m)).sum();
            let score = lp - 0.5 * dist;
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        best
    }
}

/// `argmax_i [ln pᵢ − ½(y−μᵢ)ᵀΣ⁻¹(y−μᵢ)]`, lowest index on ties. With a
/// uniform prior this is the maximum-likelihood decision.
pub fn map_classify(
    y: &[f64],
    means: &[ScenarioMean],
    prior: &DiscretePrior,
    noise: &NoiseModel,
) -> Result<usize> {
    let classifier = MapClassifier::new(means, prior, noise)?;
    check_vec(classifier.dim(), y)?;
    Ok(classifier.classify(y))
}

/// `a = Σ⁻¹(μ₀ − μ₁)`, `b = ½(μ₁ᵀΣ⁻¹μ₁ − μ₀ᵀΣ⁻¹μ₀) + ln(p₀/p₁)`.
pub fn decision_hyperplane(
    mean0: &ScenarioMean,
    mean1: &ScenarioMean,
    noise: &NoiseModel,
    prior: &DiscretePrior,
) -> Result<Hyperplane> {
    check_pair(mean0, mean1, noise)?;
    prior.check_len(2)?;
    if mean0.mean == mean1.mean {
        return Err(Error::DegenerateHypotheses);
    }
    let (p0, p1) = (prior.weights()[0], prior.weights()[1]);
    if p0 == 0.0 || p1 == 0.0 {
        return Err(Error::ZeroPrior);
    }
    let a = noise.precision_mul(&sub(&mean0.mean, &mean1.mean));
    if a.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateHypotheses);
    }
    // ½(μ₁ᵀΣ⁻¹μ₁ − μ₀ᵀΣ⁻¹μ₀) = −½ aᵀ(μ₀ + μ₁)
    let mid: Vec<f64> = mean0.mean.iter().zip(&mean1.mean).map(|(x, y)| 0.5 * (x + y)).collect();
    let offset = (p0 / p1).ln();
    Ok(Hyperplane {
        b: -dot(&a, &mid) + offset,
        a,
        includes_prior_offset: offset != 0.0,
    })
}

/// Mean and variance of the signed distance `(aᵀy + b)/‖a‖` for
/// `y ~ N(mean, Σ)`.
pub fn projection_stats(
    h: &Hyperplane,
    mean: &ScenarioMean,
    noise: &NoiseModel,
) -> Result<ProjectionStats> {
    check_vec(h.a.len(), &mean.mean)?;
    noise.check_dim(h.a.len())?;
    let norm_sq = dot(&h.a, &h.a);
    if norm_sq == 0.0 {
        return Err(Error::ZeroNormal);
    }
    let norm = norm_sq.sqrt();
    Ok(ProjectionStats {
        mean: (dot(&h.a, &mean.mean) + h.b) / norm,
        variance: noise.cov_quadratic(&h.a) / norm_sq,
    })
}

/// Conditional MAP success probabilities `(P(v₀ | v₀), P(v₁ | v₁))`.
pub fn pairwise_conditional_success(
    mean0: &ScenarioMean,
    mean1: &ScenarioMean,
    noise: &NoiseModel,
    prior: &DiscretePrior,
) -> Result<(f64, f64)> {
    check_pair(mean0, mean1, noise)?;
    prior.check_len(2)?;
    let (p0, p1) = (prior.weights()[0], prior.weights()[1]);
    if p0 == 0.0 {
        return Ok((0.0, 1.0));
    }
    if p1 == 0.0 {
        return Ok((1.0, 0.0));
    }
    let whitened = noise.whiten(&sub(&mean0.mean, &mean1.mean));
    let separation = dot(&whitened, &whitened).sqrt();
    if separation == 0.0 {
        // Constant likelihood ratio: MAP picks the heavier prior, v₀ on ties.
        return Ok(if p0 >= p1 { (1.0, 0.0) } else { (0.0, 1.0) });
    }
    // Signed distance in units of its standard deviation. Under v₀ its mean
    // is (½d² + ln(p₀/p₁))/d, under v₁ it is (−½d² + ln(p₀/p₁))/d, where d is
    // the Mahalanobis separation and the variance is the same.
    let offset = (p0 / p1).ln();
    let z0 = (0.5 * separation * separation + offset) / separation;
    let z1 = (-0.5 * separation * separation + offset) / separation;
    Ok((normal_cdf(z0), normal_cdf(-z1)))
}

/// Prior-weighted probability that the MAP rule identifies the true one of
/// two scenarios. No decision rule can do better.
pub fn pairwise_success_probability(
    mean0: &ScenarioMean,
    mean1: &ScenarioMean,
    noise: &NoiseModel,
    prior: &DiscretePrior,
) -> Result<f64> {
    let (c0, c1) = pairwise_conditional_success(mean0, mean1, noise, prior)?;
    let w = prior.weights();
    Ok((w[0] * c0 + w[1] * c1).clamp(0.0, 1.0))
}

/// Neyman–Pearson rule: decide `v₁` iff `ln L(y) ≥ log_lambda`, equivalently
/// `directionᵀy ≥ threshold`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct NpRule {
    pub log_lambda: f64,
    pub lambda: f64,
    /// `Σ⁻¹(μ₁ − μ₀)`.
    pub direction: Vec<f64>,
    pub threshold: f64,
    /// P(decide v₀ | v₁), equal to the requested β.
    pub miss_probability: f64,
    /// P(decide v₁ | v₀).
    pub false_alarm_probability: f64,
}

impl NpRule {
    pub fn decides_second(&self, y: &[f64]) -> bool {
        dot(&self.direction, y) >= self.threshold
    }

    /// Human-readable form of the rule.
    pub fn describe(&self) -> String {
        format!(
            "decide v1 iff ln L(y) >= {:.6} (L(y) >= {:.6e}); miss {:.6}, false alarm {:.6}",
            self.log_lambda, self.lambda, self.miss_probability, self.false_alarm_probability
        )
    }

    /// Boundary point for one-dimensional observations.
    pub fn scalar_boundary(&self) -> Option<f64> {
        match self.direction.as_slice() {
            [w] if *w != 0.0 => Some(self.threshold / w),
            _ => None,
        }
    }
}

/// Likelihood-ratio threshold whose miss probability is exactly `beta`.
///
/// `ln L(y)` is Gaussian with variance `d²` and mean `±d²/2` under the two
/// hypotheses, so `ln λ = d²/2 + d Φ⁻¹(β)`.
pub fn np_threshold(
    mean0: &ScenarioMean,
    mean1: &ScenarioMean,
    noise: &NoiseModel,
    beta: f64,
) -> Result<NpRule> {
    check_pair(mean0, mean1, noise)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Config(format!("beta must lie in (0, 1), got {beta}")));
    }
    let diff = sub(&mean1.mean, &mean0.mean);
    let separation = noise.mahalanobis_sq(&diff).sqrt();
    if separation == 0.0 {
        return Err(Error::DegenerateHypotheses);
    }
    let quantile = normal_quantile(beta);
    let log_lambda = 0.5 * separation * separation + separation * quantile;
    let direction = noise.precision_mul(&diff);
    let mid: Vec<f64> = mean0.mean.iter().zip(&mean1.mean).map(|(x, y)| 0.5 * (x + y)).collect();
    let threshold = log_lambda + dot(&direction, &mid);
    Ok(NpRule {
        log_lambda,
        lambda: log_lambda.exp(),
        direction,
        threshold,
        miss_probability: normal_cdf((log_lambda - 0.5 * separation * separation) / separation),
        false_alarm_probability: normal_cdf(
            -(log_lambda + 0.5 * separation * separation) / separation,
        ),
    })
}

/// Halfspace description of the MAP region of one reference scenario under
/// a uniform prior: the reference wins iff `A y + b > 0` componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceSystem {
    /// `(N−1) × T`, unit-norm rows.
    pub rows: DMatrix<f64>,
    pub offsets: Vec<f64>,
    pub reference: usize,
    /// Scenario index behind each row.
    pub competitors: Vec<usize>,
}

impl HalfspaceSystem {
    pub fn contains(&self, y: &[f64]) -> bool {
        self.rows
            .row_iter()
            .zip(&self.offsets)
            .all(|(row, b)| row.iter().zip(y).map(|(a, y)| a * y).sum::<f64>() + b > 0.0)
    }
}

pub fn halfspace_system(
    means: &[ScenarioMean],
    reference: usize,
    noise: &NoiseModel,
) -> Result<HalfspaceSystem> {
    if means.len() < 2 {
        return Err(Error::EmptyScenarioSet);
    }
    let base = means.get(reference).ok_or(Error::DimensionMismatch {
        expected: means.len(),
        found: reference,
    })?;
    let dim = base.len();
    for m in means {
        check_vec(dim, &m.mean)?;
    }
    noise.check_dim(dim)?;

    let competitors: Vec<usize> = (0..means.len()).filter(|&k| k != reference).collect();
    let mut rows = DMatrix::zeros(competitors.len(), dim);
    let mut offsets = Vec::with_capacity(competitors.len());
    for (r, &k) in competitors.iter().enumerate() {
        let other = &means[k];
        let a = noise.precision_mul(&sub(&base.mean, &other.mean));
        let norm = dot(&a, &a).sqrt();
        if base.mean == other.mean || norm == 0.0 {
            return Err(Error::DuplicateMean {
                index: k,
                other: reference,
            });
        }
        let mid: Vec<f64> = base.mean.iter().zip(&other.mean).map(|(x, y)| 0.5 * (x + y)).collect();
        let b = -dot(&a, &mid);
        for (t, v) in a.iter().enumerate() {
            rows[(r, t)] = v / norm;
        }
        offsets.push(b / norm);
    }
    Ok(HalfspaceSystem {
        rows,
        offsets,
        reference,
        competitors,
    })
}

/// Rejects scenario sets with two identical means.
pub fn check_distinct(means: &[ScenarioMean]) -> Result<()> {
    for i in 0..means.len() {
        for j in 0..i {
            if means[i].mean == means[j].mean {
                return Err(Error::DuplicateMean { index: i, other: j });
            }
        }
    }
    Ok(())
}
