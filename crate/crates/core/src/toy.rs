//! Linear-Gaussian toy problems posed directly in standard-normal space,
//! with closed-form posterior, evidence and gradient second-moment matrix.

use nalgebra::{DMatrix, DVector};

use crate::ce_fit::GaussianParams;
use crate::error::{Error, Result};
use crate::field_prior::LN_2PI;
use crate::linalg::log_det_from_cholesky;
use crate::problem::{GradientProblem, InverseProblem};

/// `y = G u + η`, `η ~ N(0, σ² I)`, prior `u ~ N(0, I)`, physical space = `u`.
#[derive(Clone, Debug)]
pub struct LinearGaussianToy {
    forward: DMatrix<f64>,
    data: DVector<f64>,
    noise_sd: f64,
}

impl LinearGaussianToy {
    pub fn new(forward: DMatrix<f64>, data: DVector<f64>, noise_sd: f64) -> Result<Self> {
        if forward.nrows() != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "forward map has {} rows but {} observations",
                forward.nrows(),
                data.len()
            )));
        }
        if !(noise_sd > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise sd must be positive, got {noise_sd}"
            )));
        }
        Ok(Self {
            forward,
            data,
            noise_sd,
        })
    }

    /// One observation of the first coordinate of `u ∈ R^d`; every other
    /// coordinate is uninformed. `d = 1` is the scalar conjugate problem.
    pub fn active_coordinate(d: usize, y: f64, noise_sd: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let mut g = DMatrix::zeros(1, d);
        g[(0, 0)] = 1.0;
        Self::new(g, DVector::from_element(1, y), noise_sd)
    }

    pub fn forward(&self) -> &DMatrix<f64> {
        &self.forward
    }

    fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.data - &self.forward * u
    }

    /// Posterior of the tempered problem `L^β φ_d`.
    pub fn tempered_posterior(&self, beta: f64) -> Result<GaussianParams> {
        let d = self.forward.ncols();
        let s2 = self.noise_sd * self.noise_sd;
        let precision =
            DMatrix::<f64>::identity(d, d) + self.forward.tr_mul(&self.forward) * (beta / s2);
        let cov = precision
            .cholesky()
            .ok_or(Error::NotPositiveDefinite {
                context: "toy posterior precision",
            })?
            .inverse();
        let mean = &cov * self.forward.tr_mul(&self.data) * (beta / s2);
        GaussianParams::new(mean, cov)
    }

    pub fn analytic_posterior(&self) -> Result<GaussianParams> {
        self.tempered_posterior(1.0)
    }

    /// `ln N(y; 0, G Gᵀ + σ² I)`.
    pub fn analytic_log_evidence(&self) -> Result<f64> {
        let m = self.forward.nrows();
        let s = &self.forward * self.forward.transpose()
            + DMatrix::<f64>::identity(m, m) * (self.noise_sd * self.noise_sd);
        let chol = s.cholesky().ok_or(Error::NotPositiveDefinite {
            context: "toy evidence covariance",
        })?;
        let z = chol
            .l()
            .solve_lower_triangular(&self.data)
            .expect("non-singular factor");
        Ok(-0.5 * (m as f64 * LN_2PI + log_det_from_cholesky(&chol.l()) + z.norm_squared()))
    }

    /// Exact `β² E_{p_β}[∇ln L ∇ln Lᵀ]` under the tempered posterior `p_β`.
    pub fn exact_h(&self, beta: f64) -> Result<DMatrix<f64>> {
        let post = self.tempered_posterior(beta)?;
        let s2 = self.noise_sd * self.noise_sd;
        let r = self.residual(post.mean());
        let g = &self.forward;
        // E[(y − Gu)(y − Gu)ᵀ] = r rᵀ + G C Gᵀ
        let second = &r * r.transpose() + g * post.cov() * g.transpose();
        Ok(g.transpose() * second * g * (beta * beta / (s2 * s2)))
    }
}

impl InverseProblem for LinearGaussianToy {
    fn dim(&self) -> usize {
        self.forward.ncols()
    }

    fn log_likelihood(&self, u: &DVector<f64>) -> f64 {
        let m = self.data.len() as f64;
        let s2 = self.noise_sd * self.noise_sd;
        -0.5 * (m * (LN_2PI + s2.ln()) + self.residual(u).norm_squared() / s2)
    }

    fn to_physical(&self, u: &DVector<f64>) -> DVector<f64> {
        u.clone()
    }
}

impl GradientProblem for LinearGaussianToy {
    fn log_likelihood_and_gradient(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        let m = self.data.len() as f64;
        let s2 = self.noise_sd * self.noise_sd;
        let r = self.residual(u);
        let ll = -0.5 * (m * (LN_2PI + s2.ln()) + r.norm_squared() / s2);
        (ll, self.forward.tr_mul(&r) / s2)
    }
}
