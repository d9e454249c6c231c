//! Likelihood-informed subspaces: estimation of the gradient second-moment
//! matrix `H`, certified rank selection, orthonormal bases, re-expression of
//! a reduced biasing density in a rotated basis, and the adaptive inner loop
//! that sizes the gradient sample.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::ce_fit::{GaussianParams, LogDensity};
use crate::error::{Error, Result};
use crate::field_prior::{log_std_normal, log_std_normal_from_norm_sq, LN_2PI};
use crate::linalg::{symmetrize, vstack};
use crate::problem::{log_likelihoods_and_gradients, GradientProblem};
use crate::tempering::{normalized_weights, solve_beta};

/// Orthonormal split `[Φ_r, Φ_⊥]` of `R^d` into a likelihood-informed
/// subspace and its complement.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    phi_r: DMatrix<f64>,
    phi_perp: DMatrix<f64>,
}

impl SubspaceBasis {
    pub fn new(phi_r: DMatrix<f64>, phi_perp: DMatrix<f64>) -> Result<Self> {
        let d = phi_r.nrows();
        if phi_perp.nrows() != d || phi_r.ncols() + phi_perp.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "basis blocks {}x{} and {}x{} do not split R^{d}",
                phi_r.nrows(),
                phi_r.ncols(),
                phi_perp.nrows(),
                phi_perp.ncols()
            )));
        }
        Ok(Self { phi_r, phi_perp })
    }

    /// `Φ_r = I_d`, empty complement.
    pub fn identity(d: usize) -> Self {
        Self {
            phi_r: DMatrix::identity(d, d),
            phi_perp: DMatrix::zeros(d, 0),
        }
    }

    /// Leading `r` eigenvectors as `Φ_r`, the remainder as `Φ_⊥`.
    pub fn from_spectrum(spectrum: &Spectrum, r: usize) -> Result<Self> {
        let d = spectrum.eigenvalues.len();
        if r == 0 || r > d {
            return Err(Error::InvalidParameter(format!("rank {r} outside 1..={d}")));
        }
        Self::new(
            spectrum.eigenvectors.columns(0, r).into_owned(),
            spectrum.eigenvectors.columns(r, d - r).into_owned(),
        )
    }

    pub fn phi_r(&self) -> &DMatrix<f64> {
        &self.phi_r
    }

    pub fn phi_perp(&self) -> &DMatrix<f64> {
        &self.phi_perp
    }

    pub fn rank(&self) -> usize {
        self.phi_r.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.phi_r.nrows()
    }

    /// The full orthogonal matrix `Φ = [Φ_r, Φ_⊥]`.
    pub fn full(&self) -> DMatrix<f64> {
        let (d, r) = (self.ambient_dim(), self.rank());
        let mut out = DMatrix::zeros(d, d);
        out.columns_mut(0, r).copy_from(&self.phi_r);
        out.columns_mut(r, d - r).copy_from(&self.phi_perp);
        out
    }

    /// Ambient rows `ū_r Φ_rᵀ + ū_⊥ Φ_⊥ᵀ`.
    pub fn compose(&self, u_r: &DMatrix<f64>, u_perp: &DMatrix<f64>) -> DMatrix<f64> {
        let mut u = u_r * self.phi_r.transpose();
        if self.phi_perp.ncols() > 0 {
            u += u_perp * self.phi_perp.transpose();
        }
        u
    }

    /// Local coordinates `(U Φ_r, U Φ_⊥)` of ambient rows `U`.
    pub fn project(&self, u: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        (u * &self.phi_r, u * &self.phi_perp)
    }

    /// Largest deviation from the orthonormality relations of the basis.
    pub fn orthonormality_error(&self) -> f64 {
        let (d, r) = (self.ambient_dim(), self.rank());
        let e_r = (self.phi_r.tr_mul(&self.phi_r) - DMatrix::<f64>::identity(r, r)).amax();
        let e_p =
            (self.phi_perp.tr_mul(&self.phi_perp) - DMatrix::<f64>::identity(d - r, d - r)).amax();
        let e_x = if r < d {
            self.phi_r.tr_mul(&self.phi_perp).amax()
        } else {
            0.0
        };
        let full = self.full();
        let e_f = (&full * full.transpose() - DMatrix::<f64>::identity(d, d)).amax();
        e_r.max(e_p).max(e_x).max(e_f)
    }
}

/// Eigenpairs of a symmetric PSD matrix, eigenvalues descending and clamped at zero.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    /// Columns paired with `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn of(h: &DMatrix<f64>) -> Self {
        let d = h.nrows();
        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues =
            DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i].max(0.0)));
        let mut eigenvectors = DMatrix::zeros(d, d);
        for (col, &i) in order.iter().enumerate() {
            let mut v = eig.eigenvectors.column(i).into_owned();
            // fix the sign so that the largest-magnitude entry is positive
            let pivot = v.iamax();
            if v[pivot] < 0.0 {
                v.neg_mut();
            }
            eigenvectors.set_column(col, &v);
        }
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.eigenvectors
            * DMatrix::from_diagonal(&self.eigenvalues)
            * self.eigenvectors.transpose()
    }
}

/// Self-normalized IS estimate `β² Σ wₖ gₖ gₖᵀ / Σ wₖ` of the gradient
/// second-moment matrix from gradient rows `grads` (`n_H × d`).
pub fn estimate_h(grads: &DMatrix<f64>, log_w: &[f64], beta: f64) -> Result<DMatrix<f64>> {
    let (n, d) = grads.shape();
    if n == 0 || log_w.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} gradients but {} weights",
            log_w.len()
        )));
    }
    let w = normalized_weights(log_w)?;
    let mut scaled = grads.clone();
    for (k, wk) in w.iter().enumerate() {
        let s = beta * wk.sqrt();
        for j in 0..d {
            scaled[(k, j)] *= s;
        }
    }
    let mut h = scaled.tr_mul(&scaled);
    symmetrize(&mut h);
    Ok(h)
}

/// Log-weights `β ℓₖ + ln φ_r(ū_r,ₖ) − ln q^{(r)}(ū_r,ₖ)` targeting the
/// tempered posterior with samples from the previous reduced density.
pub fn h_weights(
    log_lik: &[f64],
    u_r: &DMatrix<f64>,
    params_prev: &GaussianParams,
    beta: f64,
) -> Result<Vec<f64>> {
    if u_r.nrows() != log_lik.len() || u_r.ncols() != params_prev.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} likelihoods, {}x{} reduced samples, {}-dim density",
            log_lik.len(),
            u_r.nrows(),
            u_r.ncols(),
            params_prev.dim()
        )));
    }
    Ok(log_lik
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let x: Vec<f64> = u_r.row(k).iter().copied().collect();
            beta * l + log_std_normal(&x) - params_prev.log_pdf(&x)
        })
        .collect())
}

/// Smallest `r ≥ 1` with `½ Σ_{i>r} λᵢ ≤ ε`, or `d` if none qualifies.
pub fn select_rank(eigenvalues: &[f64], epsilon: f64) -> usize {
    let d = eigenvalues.len();
    // tail[i] = Σ_{j ≥ i} λ_j (zero-based)
    let mut tail = vec![0.0; d + 1];
    for i in (0..d).rev() {
        tail[i] = tail[i + 1] + eigenvalues[i];
    }
    (1..=d)
        .find(|&r| 0.5 * tail[r] <= epsilon)
        .unwrap_or(d.max(1))
}

/// The previous ambient biasing density `N(Φ_{r,t−1} μ_r, Φ_{r,t−1} Σ_r Φ_{r,t−1}ᵀ + Φ_{⊥,t−1} Φ_{⊥,t−1}ᵀ)`
/// written in the coordinates of a new basis.
///
/// With `W = Φ_tᵀ Φ_{r,t−1}` (orthonormal columns) the covariance is
/// `W Σ_r Wᵀ + (I − W Wᵀ)`, so densities cost `O(d r)` instead of `O(d³)`.
#[derive(Clone, Debug)]
pub struct AdjustedGaussian {
    w: DMatrix<f64>,
    inner: GaussianParams,
}

impl AdjustedGaussian {
    pub fn mean(&self) -> DVector<f64> {
        &self.w * self.inner.mean()
    }

    /// Dense parameters of the same density.
    pub fn to_dense(&self) -> Result<GaussianParams> {
        let d = self.w.nrows();
        let cov = &self.w
            * (self.inner.cov() - DMatrix::<f64>::identity(self.w.ncols(), self.w.ncols()))
            * self.w.transpose()
            + DMatrix::<f64>::identity(d, d);
        GaussianParams::new(self.mean(), cov)
    }
}

impl LogDensity for AdjustedGaussian {
    fn dim(&self) -> usize {
        self.w.nrows()
    }

    fn log_pdf(&self, x: &[f64]) -> f64 {
        let d = self.w.nrows();
        let r = self.w.ncols();
        // a = Wᵀ x − μ_r is the in-span coordinate of x − W μ_r
        let mut a = vec![0.0; r];
        for (j, aj) in a.iter_mut().enumerate() {
            *aj = self
                .w
                .column(j)
                .iter()
                .zip(x)
                .map(|(wij, xi)| wij * xi)
                .sum::<f64>()
                - self.inner.mean()[j];
        }
        let mean = self.mean();
        let dist_sq: f64 = x
            .iter()
            .zip(mean.iter())
            .map(|(xi, mi)| (xi - mi).powi(2))
            .sum();
        let a_sq: f64 = a.iter().map(|v| v * v).sum();
        // inner.log_pdf(μ_r + a) = -½(r ln2π + ln det Σ_r + aᵀ Σ_r⁻¹ a)
        let shifted: Vec<f64> = a
            .iter()
            .zip(self.inner.mean().iter())
            .map(|(ai, mi)| ai + mi)
            .collect();
        let in_span = self.inner.log_pdf(&shifted);
        let out_of_span = -0.5 * ((d - r) as f64 * LN_2PI + (dist_sq - a_sq).max(0.0));
        in_span + out_of_span
    }
}

fn check_same_ambient(
    prev: &SubspaceBasis,
    new: &SubspaceBasis,
    params: &GaussianParams,
) -> Result<()> {
    if prev.ambient_dim() != new.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "bases live in R^{} and R^{}",
            prev.ambient_dim(),
            new.ambient_dim()
        )));
    }
    if params.dim() != prev.rank() {
        return Err(Error::DimensionMismatch(format!(
            "{}-dim reduced density for a rank-{} basis",
            params.dim(),
            prev.rank()
        )));
    }
    Ok(())
}

/// Structured form of [`adjust_params`].
pub fn adjust_density(
    params_prev_r: &GaussianParams,
    basis_prev: &SubspaceBasis,
    basis_new: &SubspaceBasis,
) -> Result<AdjustedGaussian> {
    check_same_ambient(basis_prev, basis_new, params_prev_r)?;
    let w = basis_new.full().tr_mul(basis_prev.phi_r());
    Ok(AdjustedGaussian {
        w,
        inner: params_prev_r.clone(),
    })
}

/// Parameters of the previous ambient biasing density expressed in the new basis:
/// `μ_adj = Φ_tᵀ Φ_{r,t−1} μ_r` and
/// `Σ_adj = Φ_tᵀ (Φ_{r,t−1} Σ_r Φ_{r,t−1}ᵀ + Φ_{⊥,t−1} Φ_{⊥,t−1}ᵀ) Φ_t`.
pub fn adjust_params(
    params_prev_r: &GaussianParams,
    basis_prev: &SubspaceBasis,
    basis_new: &SubspaceBasis,
) -> Result<GaussianParams> {
    check_same_ambient(basis_prev, basis_new, params_prev_r)?;
    let phi_t = basis_new.full();
    let (phi_r, phi_p) = (basis_prev.phi_r(), basis_prev.phi_perp());
    let mean_ambient = phi_r * params_prev_r.mean();
    let cov_ambient = phi_r * params_prev_r.cov() * phi_r.transpose() + phi_p * phi_p.transpose();
    let mut cov = phi_t.transpose() * cov_ambient * &phi_t;
    symmetrize(&mut cov);
    GaussianParams::new(phi_t.tr_mul(&mean_ambient), cov)
}

/// Log-weights `β ℓ + ln φ_r(ū_r) + ln φ_{d−r}(ū_⊥) − ln q^{(d)}([ū_r; ū_⊥])` for
/// samples expressed in the current basis and drawn from the adjusted density.
pub fn adjusted_weights<Q: LogDensity + ?Sized>(
    u_r: &DMatrix<f64>,
    u_perp: &DMatrix<f64>,
    log_lik: &[f64],
    beta: f64,
    params_adj: &Q,
) -> Result<Vec<f64>> {
    let n = log_lik.len();
    let d = u_r.ncols() + u_perp.ncols();
    if u_r.nrows() != n || u_perp.nrows() != n || params_adj.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "{n} likelihoods, {}x{} and {}x{} local samples, {}-dim density",
            u_r.nrows(),
            u_r.ncols(),
            u_perp.nrows(),
            u_perp.ncols(),
            params_adj.dim()
        )));
    }
    Ok((0..n)
        .map(|k| {
            let x: Vec<f64> = u_r
                .row(k)
                .iter()
                .chain(u_perp.row(k).iter())
                .copied()
                .collect();
            let sq_r: f64 = u_r.row(k).iter().map(|v| v * v).sum();
            let sq_p: f64 = u_perp.row(k).iter().map(|v| v * v).sum();
            beta * log_lik[k]
                + log_std_normal_from_norm_sq(u_r.ncols(), sq_r)
                + log_std_normal_from_norm_sq(u_perp.ncols(), sq_p)
                - params_adj.log_pdf(&x)
        })
        .collect())
}

fn ceil_count(x: f64) -> usize {
    // absorb representation error so that e.g. 26.000000000000004 stays 26
    (x - 1e-9).ceil().max(0.0) as usize
}

/// Gradient sample size `⌈α_H r ln d⌉`, at least 2.
pub fn n_h_heuristic(alpha_h: f64, r: usize, d: usize) -> usize {
    ceil_count(alpha_h * r as f64 * (d as f64).ln()).max(2)
}

/// Level sample size `⌈α_par · r(r+3)/2 · (1 + δ_w²)⌉`.
pub fn n_samples_heuristic(alpha_par: f64, r: usize, delta_w: f64) -> usize {
    ceil_count(alpha_par * 0.5 * (r * (r + 3)) as f64 * (1.0 + delta_w * delta_w))
}

/// Draws `n` ambient samples from `q^{(r)}(ū_r) φ_{d−r}(ū_⊥)` in the given basis.
pub fn draw_reduced<R: Rng + ?Sized>(
    params: &GaussianParams,
    basis: &SubspaceBasis,
    n: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let d_perp = basis.ambient_dim() - basis.rank();
    let u_r = params.sample(n, rng);
    let u_perp = DMatrix::<f64>::from_fn(n, d_perp, |_, _| rng.sample(StandardNormal));
    basis.compose(&u_r, &u_perp)
}

#[derive(Clone, Copy, Debug)]
pub struct AdaptHSettings {
    pub alpha_h: f64,
    pub epsilon: f64,
    pub target_ness: f64,
    pub max_inner_iterations: usize,
}

impl AdaptHSettings {
    pub fn new(alpha_h: f64, epsilon: f64, target_ness: f64) -> Self {
        Self {
            alpha_h,
            epsilon,
            target_ness,
            max_inner_iterations: 20,
        }
    }
}

/// Result of one [`adapt_h`] call.
#[derive(Clone, Debug)]
pub struct AdaptHOutput {
    /// Ambient samples, one per gradient evaluation.
    pub samples: DMatrix<f64>,
    /// Local LIS / CS coordinates of `samples` in the new basis.
    pub u_r: DMatrix<f64>,
    pub u_perp: DMatrix<f64>,
    pub log_lik: Vec<f64>,
    pub basis: SubspaceBasis,
    pub spectrum: Spectrum,
    pub beta: f64,
    pub rank: usize,
    /// Number of gradient samples accumulated.
    pub n_h: usize,
    pub inner_iterations: usize,
}

/// Jointly sizes the gradient sample and selects the LIS rank.
///
/// Samples come from the previous reduced density `params_prev` in
/// `basis_prev`. On the first step (`first_step`, identity basis, standard
/// normal density) the `H` weights are all one. Every inner iteration appends
/// new samples, re-solves `β`, re-estimates `H` and re-selects the rank until
/// the `⌈α_H r ln d⌉` budget is covered.
pub fn adapt_h<P, R>(
    problem: &P,
    params_prev: &GaussianParams,
    basis_prev: &SubspaceBasis,
    beta_prev: f64,
    first_step: bool,
    settings: &AdaptHSettings,
    rng: &mut R,
) -> Result<AdaptHOutput>
where
    P: GradientProblem + ?Sized,
    R: Rng + ?Sized,
{
    let d = basis_prev.ambient_dim();
    if problem.dim() != d || params_prev.dim() != basis_prev.rank() {
        return Err(Error::DimensionMismatch(format!(
            "problem in R^{}, basis in R^{d} of rank {}, density over {} dims",
            problem.dim(),
            basis_prev.rank(),
            params_prev.dim()
        )));
    }
    let mut samples = DMatrix::zeros(0, d);
    let mut grads = DMatrix::zeros(0, d);
    let mut log_lik = Vec::new();
    let mut delta_n = n_h_heuristic(settings.alpha_h, 1, d);
    let mut iterations = 0;

    loop {
        if iterations == settings.max_inner_iterations {
            return Err(Error::AdaptHUnstable { iterations });
        }
        iterations += 1;

        let added = draw_reduced(params_prev, basis_prev, delta_n, rng);
        let (ll_add, g_add) = log_likelihoods_and_gradients(problem, &added);
        samples = vstack(&samples, &added);
        grads = vstack(&grads, &g_add);
        log_lik.extend(ll_add);

        let beta = solve_beta(&log_lik, beta_prev, settings.target_ness)?;
        let log_w = if first_step {
            vec![0.0; log_lik.len()]
        } else {
            let (u_r_prev, _) = basis_prev.project(&samples);
            h_weights(&log_lik, &u_r_prev, params_prev, beta)?
        };
        let h = estimate_h(&grads, &log_w, beta)?;
        let spectrum = Spectrum::of(&h);
        let rank = select_rank(spectrum.eigenvalues.as_slice(), settings.epsilon);
        let n_h = log_lik.len();
        let wanted = n_h_heuristic(settings.alpha_h, rank, d);

        if wanted <= n_h {
            let basis = SubspaceBasis::from_spectrum(&spectrum, rank)?;
            let (u_r, u_perp) = basis.project(&samples);
            return Ok(AdaptHOutput {
                samples,
                u_r,
                u_perp,
                log_lik,
                basis,
                spectrum,
                beta,
                rank,
                n_h,
                inner_iterations: iterations,
            });
        }
        delta_n = wanted - n_h;
    }
}
