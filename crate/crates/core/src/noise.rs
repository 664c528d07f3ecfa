//! Additive Gaussian noise models.
//!
//! Quadratic forms are evaluated in whitened coordinates `L⁻¹v`, where
//! `Σ = L Lᵀ`; the precision matrix is never formed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum NoiseModel {
    /// `σ² I` for any dimension.
    Isotropic { variance: f64 },
    /// A fixed-dimension symmetric positive definite covariance.
    Full(FullCovariance),
}

#[derive(Debug, Clone)]
pub struct FullCovariance {
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    lower: DMatrix<f64>,
}

impl FullCovariance {
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower Cholesky factor `L` with `Σ = L Lᵀ`.
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }
}

impl NoiseModel {
    pub fn isotropic(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::InvalidNoise(format!(
                "isotropic variance must be positive and finite, got {variance}"
            )));
        }
        Ok(NoiseModel::Isotropic { variance })
    }

    pub fn full(cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if n == 0 || cov.ncols() != n {
            return Err(Error::InvalidNoise(format!(
                "covariance must be square and nonempty, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidNoise("covariance has non-finite entries".into()));
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidNoise(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let chol = Cholesky::new(cov.clone()).ok_or(Error::NotPositiveDefinite)?;
        let lower = chol.l();
        if lower.diagonal().iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(NoiseModel::Full(FullCovariance { cov, chol, lower }))
    }

    /// Builds a full model from row-major nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidNoise("covariance rows must form a square matrix".into()));
        }
        Self::full(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Fixed dimension of a full model; `None` for isotropic noise.
    pub fn dim(&self) -> Option<usize> {
        match self {
            NoiseModel::Isotropic { .. } => None,
            NoiseModel::Full(f) => Some(f.cov.nrows()),
        }
    }

    pub fn check_dim(&self, len: usize) -> Result<()> {
        match self.dim() {
            Some(d) if d != len => Err(Error::DimensionMismatch {
                expected: d,
                found: len,
            }),
            _ => Ok(()),
        }
    }

    /// `L⁻¹ v`.
    pub fn whiten(&self, v: &[f64]) -> Vec<f64> {
        match self {
            NoiseModel::Isotropic { variance } => {
                let s = variance.sqrt();
                v.iter().map(|x| x / s).collect()
            }
            NoiseModel::Full(f) => {
                let rhs = DVector::from_column_slice(v);
                f.lower
                    .solve_lower_triangular(&rhs)
                    .expect("Cholesky factor has a positive diagonal")
                    .data
                    .into()
            }
        }
    }

    /// `Σ⁻¹ v` via two triangular solves.
    pub fn precision_mul(&self, v: &[f64]) -> Vec<f64> {
        match self {
            NoiseModel::Isotropic { variance } => v.iter().map(|x| x / variance).collect(),
            NoiseModel::Full(f) => f.chol.solve(&DVector::from_column_slice(v)).data.into(),
        }
    }

    /// `Σ v`.
    pub fn cov_mul(&self, v: &[f64]) -> Vec<f64> {
        match self {
            NoiseModel::Isotropic { variance } => v.iter().map(|x| x * variance).collect(),
            NoiseModel::Full(f) => (&f.cov * DVector::from_column_slice(v)).data.into(),
        }
    }

    /// `vᵀ Σ v`, computed as `‖Lᵀ v‖²`.
    pub fn cov_quadratic(&self, v: &[f64]) -> f64 {
        match self {
            NoiseModel::Isotropic { variance } => variance * dot(v, v),
            NoiseModel::Full(f) => {
                let w = f.lower.tr_mul(&DVector::from_column_slice(v));
                w.norm_squared()
            }
        }
    }

    /// `vᵀ Σ⁻¹ v`, computed as `‖L⁻¹ v‖²`.
    pub fn mahalanobis_sq(&self, v: &[f64]) -> f64 {
        let w = self.whiten(v);
        dot(&w, &w)
    }

    /// Writes `mean + L z` into `out`.
    pub fn color_into(&self, mean: &[f64], z: &[f64], out: &mut [f64]) {
        match self {
            NoiseModel::Isotropic { variance } => {
                let s = variance.sqrt();
                for ((o, m), zi) in out.iter_mut().zip(mean).zip(z) {
                    *o = m + s * zi;
                }
            }
            NoiseModel::Full(f) => {
                let n = mean.len();
                for i in 0..n {
                    let mut acc = mean[i];
                    for (j, zj) in z.iter().enumerate().take(i + 1) {
                        acc += f.lower[(i, j)] * zj;
                    }
                    out[i] = acc;
                }
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
