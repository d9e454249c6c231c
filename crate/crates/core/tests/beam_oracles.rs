//! Beam problem checked against independent brute-force evaluations.

use cebu_core::beam::{influence_matrix, measurement_locations, BeamConfig, BeamProblem};
use cebu_core::field_prior::GridSpec;
use cebu_core::problem::{GradientProblem, InverseProblem};
use cebu_core::subspace::{estimate_h, Spectrum};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

fn random_u(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

/// Literal multivariate normal log-density via LU inverse and determinant.
fn dense_mvn_logpdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let lu = cov.clone().lu();
    let inv = lu.try_inverse().unwrap();
    let r = x - mean;
    -0.5 * (x.len() as f64 * LN_2PI + log_abs_det(cov) + (r.transpose() * inv * &r)[(0, 0)])
}

/// `ln |det M|` from the LU diagonal (the determinant itself underflows here).
fn log_abs_det(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .lu()
        .u()
        .diagonal()
        .iter()
        .map(|x| x.abs().ln())
        .sum()
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let c = 0.5 * (a + b);
    let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b));
    let left = (c - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + c)) + f(c));
    let right = (b - c) / 6.0 * (f(c) + 4.0 * f(0.5 * (c + b)) + f(b));
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive_simpson(f, a, c, tol / 2.0, depth - 1)
            + adaptive_simpson(f, c, b, tol / 2.0, depth - 1)
    }
}

#[test]
fn log_likelihood_matches_dense_mvn_at_random_points() {
    let p = BeamProblem::new(BeamConfig::with_dim(30)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let u = random_u(30, &mut rng);
        let f = p.prior.to_physical(&u);
        let oracle = dense_mvn_logpdf(&p.data, &(&p.influence * f), &p.noise_cov);
        let got = p.log_likelihood(&u);
        assert!(
            (got - oracle).abs() <= 1e-10 * oracle.abs(),
            "{got} vs {oracle}"
        );
    }
}

#[test]
fn gradient_matches_central_differences() {
    let p = BeamProblem::new(BeamConfig::with_dim(25)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-5;
    for _ in 0..20 {
        let u = random_u(25, &mut rng);
        let (_, g) = p.log_likelihood_and_gradient(&u);
        let fd = DVector::from_fn(25, |j, _| {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[j] += h;
            dn[j] -= h;
            (p.log_likelihood(&up) - p.log_likelihood(&dn)) / (2.0 * h)
        });
        assert!(
            (&g - &fd).norm() <= 1e-5 * g.norm(),
            "{}",
            (&g - &fd).norm() / g.norm()
        );
    }
}

#[test]
fn hessian_is_constant() {
    let p = BeamProblem::new(BeamConfig::with_dim(12)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u0 = random_u(12, &mut rng);
    let v = random_u(12, &mut rng);
    let g = |t: f64| p.grad_log_likelihood_u(&(&u0 + &v * t));
    let second = g(2.0) - g(1.0) * 2.0 + g(0.0);
    assert!(second.amax() <= 1e-9 * g(0.0).amax().max(g(2.0).amax()));
}

#[test]
fn influence_matrix_matches_adaptive_quadrature() {
    let (length, load) = (5.0, 20.0);
    for d in [5, 37, 100] {
        let grid = GridSpec::new(length, d).unwrap();
        let xs = measurement_locations(length, 50);
        let a = influence_matrix(&grid, &xs, load, length);
        for (i, &x) in xs.iter().enumerate() {
            for j in 0..d {
                let (lo, hi) = (
                    j as f64 * length / d as f64,
                    (j + 1) as f64 * length / d as f64,
                );
                let upper = hi.min(x);
                let q = if lo >= x {
                    0.0
                } else {
                    load * adaptive_simpson(&|t| (x - t) * (length - t), lo, upper, 1e-14, 30)
                };
                let err = (a[(i, j)] - q).abs();
                assert!(
                    err <= 1e-8 * q.abs().max(1e-300) || err < 1e-300,
                    "d={d} i={i} j={j}: {} vs {q}",
                    a[(i, j)]
                );
            }
        }
    }
}

#[test]
fn posterior_matches_precision_form_in_physical_space() {
    let p = BeamProblem::new(BeamConfig::with_dim(40)).unwrap();
    let prior_prec = p.prior.cov.clone().try_inverse().unwrap();
    let noise_prec = p.noise_cov.clone().try_inverse().unwrap();
    let prec = &prior_prec + p.influence.transpose() * &noise_prec * &p.influence;
    let cov = prec.clone().try_inverse().unwrap();
    let mean =
        &cov * (&prior_prec * &p.prior.mean + p.influence.transpose() * &noise_prec * &p.data);
    let post = p.analytic_posterior().unwrap();
    let scale_m = p.prior.mean.amax();
    let scale_c = p.prior.cov.amax();
    assert!((post.mean() - &mean).amax() <= 1e-8 * scale_m);
    assert!((post.cov() - &cov).amax() <= 1e-8 * scale_c);
}

#[test]
fn scalar_field_is_textbook_conjugate_update() {
    let p = BeamProblem::new(BeamConfig {
        truth_resolution: 50,
        ..BeamConfig::with_dim(1)
    })
    .unwrap();
    let a = p.influence.column(0).into_owned();
    let s_inv = p.noise_cov.clone().try_inverse().unwrap();
    let (m0, v0) = (p.config.flex_mean, p.config.flex_sd.powi(2));
    let prec = 1.0 / v0 + (a.transpose() * &s_inv * &a)[(0, 0)];
    let var = 1.0 / prec;
    let mean = var * (m0 / v0 + (a.transpose() * &s_inv * &p.data)[(0, 0)]);
    let post = p.analytic_posterior().unwrap();
    assert!((post.mean()[0] - mean).abs() <= 1e-10 * mean.abs());
    assert!((post.cov()[(0, 0)] - var).abs() <= 1e-8 * var);
}

#[test]
fn evidence_matches_crude_monte_carlo() {
    let p = BeamProblem::new(BeamConfig::with_dim(5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 1_000_000;
    let ll: Vec<f64> = (0..n)
        .map(|_| p.log_likelihood(&random_u(5, &mut rng)))
        .collect();
    let max = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = ll.iter().map(|l| (l - max).exp()).collect();
    let mean = w.iter().sum::<f64>() / n as f64;
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    // delta method: sd(ln Ẑ) ≈ sd(w) / (√n mean)
    let se = var.sqrt() / (n as f64).sqrt() / mean;
    let est = max + mean.ln();
    let exact = p.analytic_log_evidence().unwrap();
    assert!((est - exact).abs() < 3.0 * se, "{est} vs {exact} (se {se})");
}

#[test]
fn evidence_is_the_same_in_physical_and_standard_space() {
    let p = BeamProblem::new(BeamConfig::with_dim(10)).unwrap();
    // F space: N(ỹ; A μ, A Σ Aᵀ + Σ_η)
    let s = &p.influence * &p.prior.cov * p.influence.transpose() + &p.noise_cov;
    let f_space = dense_mvn_logpdf(&p.data, &(&p.influence * &p.prior.mean), &s);
    // u space: N(ỹ; A μ, (A C)(A C)ᵀ + Σ_η)
    let ac = &p.influence * &p.prior.chol;
    let s_u = &ac * ac.transpose() + &p.noise_cov;
    let u_space = dense_mvn_logpdf(&p.data, &(&p.influence * &p.prior.mean), &s_u);
    let got = p.analytic_log_evidence().unwrap();
    assert!((got - f_space).abs() < 1e-8 * got.abs());
    assert!((got - u_space).abs() < 1e-8 * got.abs());
}

#[test]
fn evidence_is_maximal_at_the_mean_response() {
    let base = BeamProblem::new(BeamConfig::with_dim(8)).unwrap();
    let at_mean =
        BeamProblem::with_data(base.config.clone(), &base.influence * &base.prior.mean).unwrap();
    let s = &at_mean.influence * &at_mean.prior.cov * at_mean.influence.transpose()
        + &at_mean.noise_cov;
    let expected = -0.5 * (50.0 * LN_2PI + log_abs_det(&s));
    let got = at_mean.analytic_log_evidence().unwrap();
    assert!((got - expected).abs() < 1e-8 * expected.abs());
    assert!(got > base.analytic_log_evidence().unwrap());
}

#[test]
fn estimated_h_aligns_with_exact_posterior_moment() {
    let p = BeamProblem::new(BeamConfig::with_dim(3)).unwrap();
    // whitened map B and offset z0 rebuilt from dense pieces
    let l = p.noise_cov.clone().cholesky().unwrap().l();
    let b = l
        .solve_lower_triangular(&(&p.influence * &p.prior.chol))
        .unwrap();
    let z0 = l
        .solve_lower_triangular(&(&p.data - &p.influence * &p.prior.mean))
        .unwrap();
    let cu = (DMatrix::<f64>::identity(3, 3) + b.transpose() * &b)
        .try_inverse()
        .unwrap();
    let mu = &cu * b.transpose() * &z0;
    // E[g gᵀ] with g = Bᵀ(z0 − B u), u ~ N(mu, cu)
    let r = &z0 - &b * &mu;
    let exact = b.transpose() * (&r * r.transpose() + &b * &cu * b.transpose()) * &b;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let chol = cu.clone().cholesky().unwrap().l();
    let n = 10_000;
    let mut grads = DMatrix::zeros(n, 3);
    for k in 0..n {
        let u = &mu + &chol * random_u(3, &mut rng);
        grads.set_row(k, &p.grad_log_likelihood_u(&u).transpose());
    }
    let h = estimate_h(&grads, &vec![0.0; n], 1.0).unwrap();
    let v_est = Spectrum::of(&h).eigenvectors.column(0).into_owned();
    let v_ref = Spectrum::of(&exact).eigenvectors.column(0).into_owned();
    assert!(v_est.dot(&v_ref).abs() > 0.95);
}

#[test]
fn gradient_is_affine_in_the_data() {
    let base = BeamProblem::new(BeamConfig::with_dim(6)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let y1 = DVector::from_fn(50, |_, _| 1e-3 * rng.sample::<f64, _>(StandardNormal));
    let y2 = DVector::from_fn(50, |_, _| 1e-3 * rng.sample::<f64, _>(StandardNormal));
    let with = |y: DVector<f64>| BeamProblem::with_data(base.config.clone(), y).unwrap();
    let u = random_u(6, &mut rng);
    let g = |y: DVector<f64>| with(y).grad_log_likelihood_u(&u);
    let zero = g(DVector::zeros(50));
    let lhs = g(&y1 + &y2) - &zero;
    let rhs = (g(y1) - &zero) + (g(y2) - &zero);
    assert!((lhs - &rhs).amax() <= 1e-8 * rhs.amax());
}
