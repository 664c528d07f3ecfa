//! Success-probability bound for linear device models `y = A u + e`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::special::erf;

/// Above this smaller dimension the spectral norm comes from power iteration
/// instead of a full SVD.
pub const SVD_DIM_LIMIT: usize = 256;

const POWER_MAX_ITERS: usize = 100_000;
const POWER_TOL: f64 = 1e-15;

/// Largest singular value. Empty matrices give 0.
pub fn largest_singular_value(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if a.nrows().min(a.ncols()) <= SVD_DIM_LIMIT {
        a.clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .fold(0.0, f64::max)
    } else {
        largest_singular_value_power(a)
    }
}

/// Power iteration on the smaller Gram matrix with a fixed start vector.
pub fn largest_singular_value_power(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = if a.ncols() <= a.nrows() {
        a.tr_mul(a)
    } else {
        a * a.transpose()
    };
    let n = gram.nrows();
    // Irrational-step start vector; orthogonality to the top eigenvector is
    // not a practical concern.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract());
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = &gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - estimate).abs() <= POWER_TOL * next.abs() {
            estimate = next;
            break;
        }
        estimate = next;
    }
    estimate.max(0.0).sqrt()
}

/// Inputs to the linear-system bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSystemBoundInput {
    sigma_max: f64,
    magnitude: f64,
    noise_variance: f64,
    prior_null: f64,
}

impl LinearSystemBoundInput {
    pub fn new(sigma_max: f64, magnitude: f64, noise_variance: f64, prior_null: f64) -> Result<Self> {
        if !(sigma_max.is_finite() && sigma_max >= 0.0) {
            return Err(Error::Config(format!("sigma_max must be nonnegative, got {sigma_max}")));
        }
        if !(magnitude.is_finite() && magnitude >= 0.0) {
            return Err(Error::Config(format!("input magnitude must be nonnegative, got {magnitude}")));
        }
        if !(noise_variance.is_finite() && noise_variance > 0.0) {
            return Err(Error::InvalidNoise(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        if !(0.0..=1.0).contains(&prior_null) {
            return Err(Error::InvalidPrior(format!("p(u = 0) must lie in [0, 1], got {prior_null}")));
        }
        Ok(Self {
            sigma_max,
            magnitude,
            noise_variance,
            prior_null,
        })
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn prior_null(&self) -> f64 {
        self.prior_null
    }
}

/// `p₀ + ½(1 + erf(σ_max U / (2√(2σ²)))) (1 − p₀)`, nondecreasing in both
/// `U` and `σ_max`.
pub fn linear_system_upper_bound(input: &LinearSystemBoundInput) -> f64 {
    let arg = input.sigma_max * input.magnitude / (2.0 * (2.0 * input.noise_variance).sqrt());
    let detect = 0.5 * (1.0 + erf(arg));
    (input.prior_null + detect * (1.0 - input.prior_null)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn singular_value_examples() {
        assert!((largest_singular_value(&DMatrix::identity(3, 3)) - 1.0).abs() < 1e-12);
        let d = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        assert!((largest_singular_value(&d) - 3.0).abs() < 1e-12);
        let nil = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        assert!((largest_singular_value(&nil) - 2.0).abs() < 1e-12);
        assert!((largest_singular_value_power(&nil) - 2.0).abs() < 1e-12);
        assert_eq!(largest_singular_value(&DMatrix::zeros(0, 3)), 0.0);
        assert_eq!(largest_singular_value_power(&DMatrix::zeros(4, 4)), 0.0);
    }

    #[test]
    fn column_vector_norm() {
        let col = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 2.0, 4.0]);
        assert!((largest_singular_value(&col) - 5.0).abs() < 1e-12);
        assert!((largest_singular_value_power(&col) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn power_path_on_large_matrix() {
        // Rank-one plus a smaller diagonal: known top singular value.
        let n = SVD_DIM_LIMIT + 20;
        let u = DVector::from_fn(n, |i, _| ((i % 7) as f64 - 3.0) / 10.0 + 0.05);
        let un = u.norm();
        let a = &u * u.transpose() * (10.0 / (un * un)) + DMatrix::identity(n, n) * 0.5;
        let sv = largest_singular_value(&a);
        assert!((sv - 10.5).abs() <= 1e-10 * 10.5, "{sv}");
    }

    #[test]
    fn bound_examples() {
        let b = linear_system_upper_bound(&LinearSystemBoundInput::new(1.0, 1.0, 1.0, 0.5).unwrap());
        assert!((b - 0.845_731_230_637_006_5).abs() < 1e-15);
        let b = linear_system_upper_bound(&LinearSystemBoundInput::new(3.0, 0.0, 1.0, 0.5).unwrap());
        assert_eq!(b, 0.75);
        let b = linear_system_upper_bound(&LinearSystemBoundInput::new(3.0, 2.0, 1.0, 1.0).unwrap());
        assert_eq!(b, 1.0);
        assert!(LinearSystemBoundInput::new(-1.0, 1.0, 1.0, 0.5).is_err());
        assert!(LinearSystemBoundInput::new(1.0, 1.0, 0.0, 0.5).is_err());
        assert!(LinearSystemBoundInput::new(1.0, 1.0, 1.0, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn svd_and_power_agree(rows in 1usize..8, cols in 1usize..8, seed in any::<u64>()) {
            let mut state = seed;
            let a = DMatrix::from_fn(rows, cols, |_, _| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            });
            let svd = largest_singular_value(&a);
            let power = largest_singular_value_power(&a);
            prop_assert!((svd - power).abs() <= 1e-7 * svd.max(1e-12), "svd {} power {}", svd, power);
        }

        #[test]
        fn bound_is_monotone(s in 0.0f64..10.0, u in 0.0f64..10.0, ds in 0.0f64..1.0, du in 0.0f64..1.0,
                             var in 0.01f64..10.0, p0 in 0.0f64..1.0) {
            let base = linear_system_upper_bound(&LinearSystemBoundInput::new(s, u, var, p0).unwrap());
            let more_u = linear_system_upper_bound(&LinearSystemBoundInput::new(s, u + du, var, p0).unwrap());
            let more_s = linear_system_upper_bound(&LinearSystemBoundInput::new(s + ds, u, var, p0).unwrap());
            prop_assert!(more_u >= base);
            prop_assert!(more_s >= base);
            prop_assert!((0.0..=1.0).contains(&base));
        }
    }
}
