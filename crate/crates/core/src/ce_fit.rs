//! Single-component Gaussian biasing densities: weighted maximum-likelihood
//! fit, sampling and log-density.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field_prior::LN_2PI;
use crate::linalg::{cholesky_with_jitter, log_det_from_cholesky, symmetrize};
use crate::tempering::{ness, normalized_weights};

/// A log-density over `R^k`.
pub trait LogDensity {
    fn dim(&self) -> usize;
    fn log_pdf(&self, x: &[f64]) -> f64;
}

/// Mean and covariance of a Gaussian, with its Cholesky factor cached.
#[derive(Clone, Debug)]
pub struct GaussianParams {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl GaussianParams {
    pub fn new(mean: DVector<f64>, mut cov: DMatrix<f64>) -> Result<Self> {
        let k = mean.len();
        if cov.nrows() != k || cov.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "mean has length {k} but covariance is {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite Gaussian parameter".into(),
            ));
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        let asym = (0..k)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| (cov[(i, j)] - cov[(j, i)]).abs())
            .fold(0.0, f64::max);
        if asym > 1e-12 * scale {
            return Err(Error::InvalidParameter(format!(
                "covariance is not symmetric (max gap {asym:e})"
            )));
        }
        symmetrize(&mut cov);
        let trace = cov.trace();
        if !(trace > 0.0) {
            return Err(Error::NotPositiveDefinite {
                context: "Gaussian covariance",
            });
        }
        let (chol, _) = cholesky_with_jitter(&cov, trace / k as f64, "Gaussian covariance")?;
        let log_det = log_det_from_cholesky(&chol);
        Ok(Self {
            mean,
            cov,
            chol,
            log_det,
        })
    }

    /// The standard normal on `R^k`.
    pub fn standard(k: usize) -> Self {
        Self {
            mean: DVector::zeros(k),
            cov: DMatrix::identity(k, k),
            chol: DMatrix::identity(k, k),
            log_det: 0.0,
        }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `n × k` matrix of i.i.d. draws `mean + chol · z`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let k = self.mean.len();
        let z = DMatrix::<f64>::from_fn(k, n, |_, _| rng.sample(StandardNormal));
        let mut x = &self.chol * z;
        for mut col in x.column_iter_mut() {
            col += &self.mean;
        }
        x.transpose()
    }
}

impl LogDensity for GaussianParams {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_pdf(&self, x: &[f64]) -> f64 {
        let k = self.mean.len();
        debug_assert_eq!(x.len(), k);
        // forward substitution for chol · z = x - mean
        let mut z = vec![0.0; k];
        let mut quad = 0.0;
        for i in 0..k {
            let mut s = x[i] - self.mean[i];
            for (j, zj) in z.iter().enumerate().take(i) {
                s -= self.chol[(i, j)] * zj;
            }
            z[i] = s / self.chol[(i, i)];
            quad += z[i] * z[i];
        }
        -0.5 * (k as f64 * LN_2PI + self.log_det + quad)
    }
}

/// Weighted maximum-likelihood Gaussian for the rows of `samples` (`n × k`).
///
/// Mean and covariance use the self-normalized weights; the covariance uses
/// the `1 / Σw` normalizer.
pub fn weighted_fit(samples: &DMatrix<f64>, log_w: &[f64]) -> Result<GaussianParams> {
    let (n, k) = samples.shape();
    if log_w.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} samples but {} weights",
            log_w.len()
        )));
    }
    if n < k + 2 {
        return Err(Error::UnderdeterminedFit { n, k });
    }
    let ess = ness(log_w)? * n as f64;
    if ess < 2.0 {
        return Err(Error::WeightDegeneracy { ess });
    }
    let w = normalized_weights(log_w)?;

    let mut mean = DVector::zeros(k);
    for (i, wi) in w.iter().enumerate() {
        mean.axpy(*wi, &samples.row(i).transpose(), 1.0);
    }
    // scale each centred row by sqrt(w) so that cov = Xᵀ X
    let mut centred = samples.clone();
    for (i, wi) in w.iter().enumerate() {
        let s = wi.sqrt();
        for j in 0..k {
            centred[(i, j)] = s * (centred[(i, j)] - mean[j]);
        }
    }
    let mut cov = centred.tr_mul(&centred);
    symmetrize(&mut cov);
    GaussianParams::new(mean, cov)
}
