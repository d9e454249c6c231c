//! Discretized Gaussian random fields with exponential correlation, and the
//! affine map between standard-normal space and physical space.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, solve_lower};

/// `ln(2π)`.
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Equal-segment midpoint discretization of `[0, domain_length]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub domain_length: f64,
    pub d: usize,
    pub midpoints: Vec<f64>,
}

impl GridSpec {
    pub fn new(domain_length: f64, d: usize) -> Result<Self> {
        if !(domain_length > 0.0 && domain_length.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "domain length must be positive, got {domain_length}"
            )));
        }
        if d == 0 {
            return Err(Error::InvalidParameter(
                "grid needs at least one segment".into(),
            ));
        }
        let h = domain_length / d as f64;
        let midpoints = (0..d).map(|i| (i as f64 + 0.5) * h).collect();
        Ok(Self {
            domain_length,
            d,
            midpoints,
        })
    }

    pub fn segment_width(&self) -> f64 {
        self.domain_length / self.d as f64
    }

    /// Bounds `[a_j, b_j]` of segment `j`.
    pub fn segment(&self, j: usize) -> (f64, f64) {
        let h = self.segment_width();
        (j as f64 * h, (j + 1) as f64 * h)
    }
}

/// `σ² · exp(-|x - x'| / l)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentialKernel {
    pub sigma: f64,
    pub corr_length: f64,
}

impl ExponentialKernel {
    pub fn new(sigma: f64, corr_length: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kernel sigma must be positive, got {sigma}"
            )));
        }
        if !(corr_length > 0.0 && corr_length.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "correlation length must be positive, got {corr_length}"
            )));
        }
        Ok(Self { sigma, corr_length })
    }

    pub fn correlation(&self, x: f64, y: f64) -> f64 {
        (-(x - y).abs() / self.corr_length).exp()
    }

    pub fn covariance(&self, x: f64, y: f64) -> f64 {
        self.sigma * self.sigma * self.correlation(x, y)
    }

    /// Covariance matrix of the field at arbitrary points.
    pub fn covariance_matrix(&self, points: &[f64]) -> DMatrix<f64> {
        let n = points.len();
        DMatrix::from_fn(n, n, |i, j| self.covariance(points[i], points[j]))
    }
}

/// Covariance of the midpoint-discretized field.
pub fn build_covariance(grid: &GridSpec, kernel: &ExponentialKernel) -> DMatrix<f64> {
    kernel.covariance_matrix(&grid.midpoints)
}

/// Homogeneous Gaussian prior over the `d` segment values of a field.
#[derive(Clone, Debug)]
pub struct GaussianFieldPrior {
    pub grid: GridSpec,
    pub kernel: ExponentialKernel,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Lower factor with `chol · cholᵀ = cov` (plus jitter, if any was needed).
    pub chol: DMatrix<f64>,
}

impl GaussianFieldPrior {
    pub fn new(grid: GridSpec, mean_value: f64, kernel: ExponentialKernel) -> Result<Self> {
        let cov = build_covariance(&grid, &kernel);
        let scale = kernel.sigma * kernel.sigma;
        let (chol, jitter) = cholesky_with_jitter(&cov, scale, "field prior covariance")?;
        if jitter > 0.0 {
            log::debug!("field prior covariance needed jitter {jitter:e}");
        }
        let mean = DVector::from_element(grid.d, mean_value);
        Ok(Self {
            grid,
            kernel,
            mean,
            cov,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.d
    }

    /// `F = mean + chol · u`.
    pub fn to_physical(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.mean + &self.chol * u
    }

    /// Inverse of [`Self::to_physical`].
    pub fn to_standard(&self, f: &DVector<f64>) -> DVector<f64> {
        solve_lower(&self.chol, &(f - &self.mean))
    }

    /// Marginal standard deviations `sqrt(diag(cov))`.
    pub fn marginal_std(&self) -> DVector<f64> {
        self.cov.diagonal().map(f64::sqrt)
    }
}

/// Log-density of the `k`-dimensional standard normal.
pub fn log_std_normal(u: &[f64]) -> f64 {
    let sq: f64 = u.iter().map(|x| x * x).sum();
    log_std_normal_from_norm_sq(u.len(), sq)
}

/// Log-density of the `k`-dimensional standard normal given `‖u‖²`.
pub fn log_std_normal_from_norm_sq(k: usize, norm_sq: f64) -> f64 {
    -0.5 * k as f64 * LN_2PI - 0.5 * norm_sq
}
