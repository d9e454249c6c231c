//! Cantilever beam with a point load at the free end and an uncertain,
//! spatially varying flexibility field, observed through noisy deflections.
//!
//! The flexibility is piecewise constant on `d` equal segments, so the
//! deflection at `x` is exactly linear in the segment values:
//! `w(x) = P Σ_j F_j ∫_{a_j}^{min(b_j, x)} (x − t)(L − t) dt`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ce_fit::GaussianParams;
use crate::error::{Error, Result};
use crate::field_prior::{ExponentialKernel, GaussianFieldPrior, GridSpec, LN_2PI};
use crate::linalg::{cholesky_with_jitter, log_det_from_cholesky, solve_lower, symmetrize};
use crate::problem::{GradientProblem, InverseProblem};

/// Seed of the synthetic measurement set shipped with the repository.
pub const CANONICAL_DATA_SEED: u64 = 20_220_517;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    /// m
    pub length: f64,
    /// kN, acting at the free end
    pub load: f64,
    pub d: usize,
    /// kN⁻¹ m⁻²
    pub flex_mean: f64,
    pub flex_sd: f64,
    /// m
    pub flex_corr_length: f64,
    pub n_obs: usize,
    /// m
    pub noise_sd: f64,
    pub noise_corr_length: f64,
    /// Segments of the fine grid used to synthesize the data.
    pub truth_resolution: usize,
    pub data_seed: u64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            length: 5.0,
            load: 20.0,
            d: 100,
            flex_mean: 1e-4,
            flex_sd: 3.5e-5,
            flex_corr_length: 2.0,
            n_obs: 50,
            noise_sd: 1e-3,
            noise_corr_length: 1.0,
            truth_resolution: 1000,
            data_seed: CANONICAL_DATA_SEED,
        }
    }
}

impl BeamConfig {
    pub fn with_dim(d: usize) -> Self {
        Self {
            d,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.load.is_finite() && self.flex_mean.is_finite()) {
            return Err(Error::InvalidParameter(
                "beam length must be positive and constants finite".into(),
            ));
        }
        if self.n_obs == 0 || self.d == 0 {
            return Err(Error::InvalidParameter(
                "beam needs d > 0 and at least one observation".into(),
            ));
        }
        Ok(())
    }
}

/// Measurement locations `xᵢ = i L / n_obs`, `i = 1..=n_obs`.
pub fn measurement_locations(length: f64, n_obs: usize) -> Vec<f64> {
    (1..=n_obs)
        .map(|i| i as f64 * length / n_obs as f64)
        .collect()
}

/// Deflection influence matrix: `A_ij = P ∫_{a_j}^{min(b_j, xᵢ)} (xᵢ − t)(L − t) dt`.
pub fn influence_matrix(grid: &GridSpec, meas_x: &[f64], load: f64, length: f64) -> DMatrix<f64> {
    DMatrix::from_fn(meas_x.len(), grid.d, |i, j| {
        let x = meas_x[i];
        let (a, b) = grid.segment(j);
        if a >= x {
            return 0.0;
        }
        let c = b.min(x);
        // antiderivative of (x − t)(L − t) in t, written in s = x − t
        let anti = |t: f64| {
            let s = x - t;
            -((length - x) * s * s / 2.0 + s * s * s / 3.0)
        };
        load * (anti(c) - anti(a))
    })
}

/// Closed-form mean deflection `P μ_F x² (3L − x) / 6` for a constant flexibility.
pub fn mean_deflection(load: f64, flex_mean: f64, length: f64, x: f64) -> f64 {
    load * flex_mean * x * x * (3.0 * length - x) / 6.0
}

/// Synthetic measurement set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BeamData {
    pub seed: u64,
    pub meas_x: Vec<f64>,
    pub observations: Vec<f64>,
    /// Noise-free deflections of the truth at `meas_x`.
    pub truth_deflection: Vec<f64>,
    /// Truth field on the fine grid.
    pub truth_field: Vec<f64>,
    pub truth_resolution: usize,
}

impl BeamData {
    /// Observation vector as CSV (`x,y`), floats with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y\n");
        for (x, y) in self.meas_x.iter().zip(&self.observations) {
            out.push_str(&format!("{x:.16e},{y:.16e}\n"));
        }
        out
    }
}

/// Samples a truth field of the prior on a fine grid, computes its exact
/// deflections and adds one correlated noise draw.
///
/// The exponential kernel is Markov on a regular grid, so the field is drawn
/// exactly by an AR(1) recursion without factorizing the fine covariance.
pub fn generate_data(config: &BeamConfig, seed: u64) -> Result<BeamData> {
    config.validate()?;
    if config.truth_resolution <= config.d {
        return Err(Error::InvalidParameter(format!(
            "truth resolution {} must exceed d = {}",
            config.truth_resolution, config.d
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fine = GridSpec::new(config.length, config.truth_resolution)?;
    let rho = (-fine.segment_width() / config.flex_corr_length).exp();
    let innovation = config.flex_sd * (1.0 - rho * rho).sqrt();
    let mut field = Vec::with_capacity(fine.d);
    let z0: f64 = StandardNormal.sample(&mut rng);
    let mut dev = config.flex_sd * z0;
    for _ in 0..fine.d {
        field.push(config.flex_mean + dev);
        let z: f64 = StandardNormal.sample(&mut rng);
        dev = rho * dev + innovation * z;
    }

    let meas_x = measurement_locations(config.length, config.n_obs);
    let a_fine = influence_matrix(&fine, &meas_x, config.load, config.length);
    let truth = &a_fine * DVector::from_column_slice(&field);

    let mut observations = truth.clone();
    if config.noise_sd > 0.0 {
        let kernel = ExponentialKernel::new(config.noise_sd, config.noise_corr_length)?;
        let cov = kernel.covariance_matrix(&meas_x);
        let (chol, _) = cholesky_with_jitter(&cov, config.noise_sd.powi(2), "noise covariance")?;
        let z = DVector::<f64>::from_fn(meas_x.len(), |_, _| StandardNormal.sample(&mut rng));
        observations += chol * z;
    }
    Ok(BeamData {
        seed,
        meas_x,
        observations: observations.iter().copied().collect(),
        truth_deflection: truth.iter().copied().collect(),
        truth_field: field,
        truth_resolution: config.truth_resolution,
    })
}

/// The discretized beam inverse problem.
#[derive(Clone, Debug)]
pub struct BeamProblem {
    pub config: BeamConfig,
    pub prior: GaussianFieldPrior,
    pub meas_x: Vec<f64>,
    pub noise_cov: DMatrix<f64>,
    pub data: DVector<f64>,
    /// `A`, `n_obs × d`.
    pub influence: DMatrix<f64>,
    noise_chol: DMatrix<f64>,
    /// `L_η⁻¹ A C` with `C` the prior factor: maps `u` to whitened deflections.
    whitened_map: DMatrix<f64>,
    /// `L_η⁻¹ (ỹ − A μ_F)`.
    whitened_offset: DVector<f64>,
    log_norm: f64,
}

impl BeamProblem {
    /// Builds the problem with data generated from `config.data_seed`.
    pub fn new(config: BeamConfig) -> Result<Self> {
        let data = generate_data(&config, config.data_seed)?;
        Self::with_data(config, DVector::from_vec(data.observations))
    }

    pub fn with_data(config: BeamConfig, data: DVector<f64>) -> Result<Self> {
        config.validate()?;
        let grid = GridSpec::new(config.length, config.d)?;
        let meas_x = measurement_locations(config.length, config.n_obs);
        if data.len() != meas_x.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} observations for {} locations",
                data.len(),
                meas_x.len()
            )));
        }
        let prior = GaussianFieldPrior::new(
            grid.clone(),
            config.flex_mean,
            ExponentialKernel::new(config.flex_sd, config.flex_corr_length)?,
        )?;
        let influence = influence_matrix(&grid, &meas_x, config.load, config.length);
        let noise_cov = ExponentialKernel::new(config.noise_sd, config.noise_corr_length)?
            .covariance_matrix(&meas_x);
        let (noise_chol, _) =
            cholesky_with_jitter(&noise_cov, config.noise_sd.powi(2), "noise covariance")?;
        let whitened_map = noise_chol
            .solve_lower_triangular(&(&influence * &prior.chol))
            .expect("non-singular noise factor");
        let whitened_offset = solve_lower(&noise_chol, &(&data - &influence * &prior.mean));
        let log_norm = -0.5 * (meas_x.len() as f64 * LN_2PI + log_det_from_cholesky(&noise_chol));
        Ok(Self {
            config,
            prior,
            meas_x,
            noise_cov,
            data,
            influence,
            noise_chol,
            whitened_map,
            whitened_offset,
            log_norm,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.prior.grid
    }

    /// Model deflections `A F` at the measurement locations.
    pub fn forward(&self, field: &DVector<f64>) -> DVector<f64> {
        &self.influence * field
    }

    fn whitened_residual(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.whitened_offset - &self.whitened_map * u
    }

    /// Gaussian log-likelihood of the data for standard-normal coordinates `u`.
    pub fn log_likelihood_u(&self, u: &DVector<f64>) -> f64 {
        self.log_norm - 0.5 * self.whitened_residual(u).norm_squared()
    }

    /// `Cᵀ Aᵀ Σ_η⁻¹ (ỹ − A F(u))`.
    pub fn grad_log_likelihood_u(&self, u: &DVector<f64>) -> DVector<f64> {
        self.whitened_map.tr_mul(&self.whitened_residual(u))
    }

    /// Prior predictive covariance `A Σ_FF Aᵀ + Σ_ηη`.
    fn predictive_cov(&self) -> DMatrix<f64> {
        let mut s =
            &self.influence * &self.prior.cov * self.influence.transpose() + &self.noise_cov;
        symmetrize(&mut s);
        s
    }

    /// Closed-form posterior of the flexibility values `F | ỹ`.
    pub fn analytic_posterior(&self) -> Result<GaussianParams> {
        let s = self.predictive_cov();
        let chol = s.cholesky().ok_or(Error::NotPositiveDefinite {
            context: "predictive covariance",
        })?;
        let cross = &self.prior.cov * self.influence.transpose();
        let innovation = &self.data - &self.influence * &self.prior.mean;
        let mean = &self.prior.mean + &cross * chol.solve(&innovation);
        let mut cov = &self.prior.cov - &cross * chol.solve(&cross.transpose());
        symmetrize(&mut cov);
        GaussianParams::new(mean, cov)
    }

    /// `ln N(ỹ; A μ_F, A Σ_FF Aᵀ + Σ_ηη)`.
    pub fn analytic_log_evidence(&self) -> Result<f64> {
        let s = self.predictive_cov();
        let scale = s.trace() / s.nrows() as f64;
        let (l, _) = cholesky_with_jitter(&s, scale, "predictive covariance")?;
        let z = solve_lower(&l, &(&self.data - &self.influence * &self.prior.mean));
        Ok(-0.5 * (self.data.len() as f64 * LN_2PI + log_det_from_cholesky(&l) + z.norm_squared()))
    }

    /// Noise factor `L_η` with `L_η L_ηᵀ = Σ_ηη`.
    pub fn noise_chol(&self) -> &DMatrix<f64> {
        &self.noise_chol
    }
}

impl InverseProblem for BeamProblem {
    fn dim(&self) -> usize {
        self.config.d
    }

    fn log_likelihood(&self, u: &DVector<f64>) -> f64 {
        self.log_likelihood_u(u)
    }

    fn to_physical(&self, u: &DVector<f64>) -> DVector<f64> {
        self.prior.to_physical(u)
    }
}

impl GradientProblem for BeamProblem {
    fn log_likelihood_and_gradient(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        let r = self.whitened_residual(u);
        (
            self.log_norm - 0.5 * r.norm_squared(),
            self.whitened_map.tr_mul(&r),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ce_fit::LogDensity;
    use crate::linalg::max_abs_diff;

    #[test]
    fn influence_is_causal_and_non_negative() {
        let grid = GridSpec::new(5.0, 40).unwrap();
        let x = vec![grid.midpoints[0], 2.5, 5.0];
        let a = influence_matrix(&grid, &x, 20.0, 5.0);
        assert!(a.iter().all(|v| *v >= 0.0));
        assert!(a[(0, 0)] > 0.0);
        for j in 1..40 {
            assert_eq!(a[(0, j)], 0.0);
        }
        for j in 0..40 {
            let (aj, _) = grid.segment(j);
            if aj >= 2.5 {
                assert_eq!(a[(1, j)], 0.0);
            }
        }
    }

    #[test]
    fn constant_field_tip_deflection() {
        for d in [1, 7, 100] {
            let grid = GridSpec::new(5.0, d).unwrap();
            let a = influence_matrix(&grid, &[5.0, 2.0], 20.0, 5.0);
            let w = &a * DVector::from_element(d, 1e-4);
            // P μ L³ / 3 = 20 · 1e-4 · 125 / 3
            assert!((w[0] - 0.083_333_333_333_333_33).abs() < 1e-15);
            assert!((w[1] - mean_deflection(20.0, 1e-4, 5.0, 2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn data_generation_is_deterministic_and_noiseless_limit_exact() {
        let cfg = BeamConfig::with_dim(10);
        let a = generate_data(&cfg, 3).unwrap();
        let b = generate_data(&cfg, 3).unwrap();
        assert_eq!(a.observations, b.observations);
        let quiet = BeamConfig {
            noise_sd: 0.0,
            ..cfg.clone()
        };
        let q = generate_data(&quiet, 3).unwrap();
        assert_eq!(q.observations, q.truth_deflection);
        assert!(generate_data(
            &BeamConfig {
                truth_resolution: 10,
                ..cfg
            },
            1
        )
        .is_err());
    }

    #[test]
    fn fine_grid_mean_response_at_tip() {
        let grid = GridSpec::new(5.0, 1000).unwrap();
        let a = influence_matrix(&grid, &[5.0], 20.0, 5.0);
        let w = (&a * DVector::from_element(1000, 1e-4))[0];
        assert!((w - 0.25 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_residual_maximizes_likelihood() {
        let p = BeamProblem::new(BeamConfig::with_dim(8)).unwrap();
        let u = DVector::from_fn(8, |i, _| 0.1 * i as f64);
        let f = p.prior.to_physical(&u);
        let clean = BeamProblem::with_data(p.config.clone(), p.forward(&f)).unwrap();
        let (ll, g) = clean.log_likelihood_and_gradient(&u);
        let expect = -0.5
            * (50.0 * LN_2PI
                + clean
                    .noise_cov
                    .clone()
                    .cholesky()
                    .unwrap()
                    .l()
                    .diagonal()
                    .map(|x| 2.0 * x.ln())
                    .sum());
        assert!((ll - expect).abs() < 1e-9 * expect.abs());
        assert!(g.amax() < 1e-6 * clean.grad_log_likelihood_u(&DVector::zeros(8)).amax());
    }

    #[test]
    fn quadratic_form_scales_with_noise_variance() {
        let base = BeamProblem::new(BeamConfig::with_dim(6)).unwrap();
        let loud = BeamProblem::with_data(
            BeamConfig {
                noise_sd: 2e-3,
                ..base.config.clone()
            },
            base.data.clone(),
        )
        .unwrap();
        let u = DVector::from_element(6, 0.3);
        let q_base = base.log_norm - base.log_likelihood_u(&u);
        let q_loud = loud.log_norm - loud.log_likelihood_u(&u);
        assert!((q_loud - q_base / 4.0).abs() < 1e-10 * q_base);
        assert!((loud.log_norm - base.log_norm + 25.0 * 4f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn no_information_returns_prior() {
        let p = BeamProblem::new(BeamConfig::with_dim(5)).unwrap();
        let mut blind = p.clone();
        blind.influence = DMatrix::zeros(50, 5);
        let post = blind.analytic_posterior().unwrap();
        assert!((post.mean() - &p.prior.mean).amax() < 1e-20);
        assert!(max_abs_diff(post.cov(), &p.prior.cov) < 1e-22);
    }

    #[test]
    fn posterior_shrinks_prior_covariance() {
        let p = BeamProblem::new(BeamConfig::with_dim(12)).unwrap();
        let post = p.analytic_posterior().unwrap();
        let diff = &p.prior.cov - post.cov();
        let eig = nalgebra::SymmetricEigen::new(diff);
        assert!(eig.eigenvalues.iter().all(|l| *l > -1e-20));
    }

    #[test]
    fn posterior_agrees_with_standard_space_precision_route() {
        // u-space: C_u = (I + BᵀB)⁻¹, m_u = C_u Bᵀ z0; F = μ + C u
        let p = BeamProblem::new(BeamConfig::with_dim(20)).unwrap();
        let b = &p.whitened_map;
        let prec = DMatrix::<f64>::identity(20, 20) + b.tr_mul(b);
        let cu = prec.cholesky().unwrap().inverse();
        let mu = &cu * b.tr_mul(&p.whitened_offset);
        let mean = &p.prior.mean + &p.prior.chol * mu;
        let cov = &p.prior.chol * cu * p.prior.chol.transpose();
        let post = p.analytic_posterior().unwrap();
        assert!((post.mean() - mean).amax() < 1e-10 * p.config.flex_mean);
        assert!(max_abs_diff(post.cov(), &cov) < 1e-8 * p.config.flex_sd.powi(2));
        // Bayes identity in F space at the posterior mean ties evidence to the rest
        let f = post.mean().clone();
        let u = p.prior.to_standard(&f);
        let prior_logpdf = GaussianParams::new(p.prior.mean.clone(), p.prior.cov.clone())
            .unwrap()
            .log_pdf(f.as_slice());
        let lz = p.log_likelihood_u(&u) + prior_logpdf - post.log_pdf(f.as_slice());
        assert!((lz - p.analytic_log_evidence().unwrap()).abs() < 1e-6);
    }
}
