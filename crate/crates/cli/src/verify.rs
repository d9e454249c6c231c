//! Acceptance suite: eight criteria, each checked against independent
//! closed-form or brute-force oracles and reported as one PASS/FAIL line.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use anyhow::{anyhow, ensure, Result};
use cebu_core::beam::{influence_matrix, measurement_locations, BeamConfig, BeamProblem};
use cebu_core::ce_fit::{weighted_fit, GaussianParams, LogDensity};
use cebu_core::experiment::{run_experiment, run_once, Method, RunConfig, RunReport};
use cebu_core::field_prior::GridSpec;
use cebu_core::problem::{GradientProblem, InverseProblem};
use cebu_core::subspace::{
    adapt_h, adjust_density, adjusted_weights, h_weights, select_rank, AdaptHSettings,
};
use cebu_core::subspace::{Spectrum, SubspaceBasis};
use cebu_core::tempering::ness;
use cebu_core::toy::LinearGaussianToy;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Beam dimensions of the accuracy, rank and step studies.
pub const STUDY_DIMS: [usize; 4] = [5, 25, 50, 100];

#[derive(Clone, Debug, Serialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub limit_seconds: Option<f64>,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        let limit = self
            .limit_seconds
            .map_or_else(String::new, |l| format!(" / limit {l:.0} s"));
        format!(
            "criterion {} [{}] {}: {} ({:.1} s{limit})",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    pub repeats: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            repeats: 20,
        }
    }
}

/// Runs criteria, sharing sampler studies between them.
pub struct Verifier {
    options: VerifyOptions,
    studies: Mutex<BTreeMap<String, Arc<RunReport>>>,
}

type Check = fn(&Verifier) -> Result<(bool, String)>;

const CRITERIA: [(usize, &str, Option<f64>, Check); 8] = [
    (
        1,
        "beam oracle consistency",
        Some(120.0),
        Verifier::beam_oracles,
    ),
    (
        2,
        "reduced sampler accuracy across dimensions",
        Some(600.0),
        Verifier::accuracy,
    ),
    (3, "cost separation at d = 100", Some(900.0), Verifier::cost),
    (
        4,
        "rank collapse after the first step",
        None,
        Verifier::rank_collapse,
    ),
    (5, "step counts", None, Verifier::step_counts),
    (6, "evidence accuracy at d = 25", None, Verifier::evidence),
    (
        7,
        "threshold monotonicity at d = 100",
        None,
        Verifier::threshold,
    ),
    (
        8,
        "unit and property suites",
        Some(180.0),
        Verifier::properties,
    ),
];

impl Verifier {
    pub fn new(options: VerifyOptions) -> Self {
        Self {
            options,
            studies: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn criterion_ids() -> impl Iterator<Item = usize> {
        CRITERIA.iter().map(|c| c.0)
    }

    pub fn run(&self, id: usize) -> Result<CriterionOutcome> {
        let &(id, name, limit_seconds, check) = CRITERIA
            .iter()
            .find(|c| c.0 == id)
            .ok_or_else(|| anyhow!("no criterion {id}"))?;
        let start = Instant::now();
        let (passed, detail) = match check(self) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e:#}")),
        };
        let seconds = start.elapsed().as_secs_f64();
        let in_time = limit_seconds.is_none_or(|l| seconds <= l);
        Ok(CriterionOutcome {
            id,
            name,
            passed: passed && in_time,
            detail,
            seconds,
            limit_seconds,
        })
    }

    pub fn run_all(&self) -> Vec<CriterionOutcome> {
        Self::criterion_ids()
            .map(|id| self.run(id).expect("listed criterion"))
            .collect()
    }

    /// Beam study with the default study settings, computed once.
    pub fn study(&self, method: Method, d: usize, epsilon: f64) -> Result<Arc<RunReport>> {
        let cfg = RunConfig {
            method,
            d,
            epsilon,
            repeats: self.options.repeats,
            seed: self.options.seed,
            ..RunConfig::default()
        };
        let key = cfg.to_kv_string();
        if let Some(r) = self.studies.lock().expect("study cache").get(&key) {
            return Ok(r.clone());
        }
        log::info!("study {method} d = {d} epsilon = {epsilon}");
        let report = Arc::new(run_experiment(&cfg).map_err(|e| anyhow!("{method} d = {d}: {e}"))?);
        self.studies
            .lock()
            .expect("study cache")
            .insert(key, report.clone());
        Ok(report)
    }

    fn beam_oracles(&self) -> Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.options.seed ^ 0xbea);
        let p = BeamProblem::new(BeamConfig::with_dim(25))?;

        // likelihood vs literal MVN density
        let mut lik_err: f64 = 0.0;
        for _ in 0..100 {
            let u = standard_normal_vector(25, &mut rng);
            let oracle = dense_mvn_logpdf(
                &p.data,
                &(&p.influence * p.prior.to_physical(&u)),
                &p.noise_cov,
            );
            lik_err = lik_err.max((p.log_likelihood(&u) - oracle).abs() / oracle.abs());
        }

        // Bayes identity in physical space: ln p(ỹ|F) + ln p(F) − ln Z = ln p(F|ỹ)
        let post = p.analytic_posterior()?;
        let log_z = p.analytic_log_evidence()?;
        let mut bayes_err: f64 = 0.0;
        for _ in 0..20 {
            let f = post.mean() + post.chol() * standard_normal_vector(25, &mut rng);
            let lhs = dense_mvn_logpdf(&p.data, &(&p.influence * &f), &p.noise_cov)
                + dense_mvn_logpdf(&f, &p.prior.mean, &p.prior.cov)
                - log_z;
            let rhs = dense_mvn_logpdf(&f, post.mean(), post.cov());
            bayes_err = bayes_err.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        }

        // evidence vs crude Monte Carlo at d = 5
        let p5 = BeamProblem::new(BeamConfig::with_dim(5))?;
        let n = 1_000_000;
        let ll: Vec<f64> = (0..n)
            .map(|_| p5.log_likelihood(&standard_normal_vector(5, &mut rng)))
            .collect();
        let max = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = ll.iter().map(|l| (l - max).exp()).collect();
        let mean = w.iter().sum::<f64>() / n as f64;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = var.sqrt() / (n as f64).sqrt() / mean;
        let mc = max + mean.ln();
        let exact5 = p5.analytic_log_evidence()?;
        let z_score = (mc - exact5).abs() / se;

        // influence vs adaptive quadrature
        let mut quad_err: f64 = 0.0;
        for d in [5, 100] {
            let cfg = BeamConfig::with_dim(d);
            let grid = GridSpec::new(cfg.length, d)?;
            let xs = measurement_locations(cfg.length, cfg.n_obs);
            let a = influence_matrix(&grid, &xs, cfg.load, cfg.length);
            for (i, &x) in xs.iter().enumerate() {
                for j in 0..d {
                    let (lo, hi) = grid.segment(j);
                    if lo >= x {
                        ensure!(
                            a[(i, j)] == 0.0,
                            "influence of segment {j} beyond x = {x} is not zero"
                        );
                        continue;
                    }
                    let l = cfg.length;
                    let q = cfg.load
                        * adaptive_simpson(&|t| (x - t) * (l - t), lo, hi.min(x), 1e-14, 30);
                    quad_err = quad_err.max((a[(i, j)] - q).abs() / q.abs());
                }
            }
        }

        let passed = lik_err <= 1e-10 && bayes_err <= 1e-8 && z_score < 3.0 && quad_err < 1e-8;
        Ok((
            passed,
            format!(
                "likelihood vs dense MVN rel {lik_err:.1e}, Bayes identity rel {bayes_err:.1e}, MC ln Z {mc:.5} vs {exact5:.5} ({z_score:.2} SE), influence vs quadrature rel {quad_err:.1e}"
            ),
        ))
    }

    fn accuracy(&self) -> Result<(bool, String)> {
        let mut ok = true;
        let mut parts = Vec::new();
        let mut by_d = BTreeMap::new();
        for d in STUDY_DIMS {
            let a = self.study(Method::Cebured, d, 1.0)?.aggregate.clone();
            ok &= a.eps_mu_mean <= 0.10 && a.eps_var_mean <= 0.35;
            parts.push(format!("d={d}: {:.4}/{:.4}", a.eps_mu_mean, a.eps_var_mean));
            by_d.insert(d, a);
        }
        let (hi, lo) = (&by_d[&100], &by_d[&25]);
        let ratio_mu = hi.eps_mu_mean / lo.eps_mu_mean;
        let ratio_var = hi.eps_var_mean / lo.eps_var_mean;
        ok &= ratio_mu <= 1.5 && ratio_var <= 1.5;
        Ok((
            ok,
            format!(
                "eps_mu/eps_var {} (gates 0.10/0.35); d=100 vs d=25 ratios {ratio_mu:.2}/{ratio_var:.2} (gate 1.5)",
                parts.join(", ")
            ),
        ))
    }

    fn cost(&self) -> Result<(bool, String)> {
        let red = self.study(Method::Cebured, 100, 1.0)?.aggregate.clone();
        let full = self.study(Method::Cebu, 100, 1.0)?.aggregate.clone();
        let ok = red.mean_likelihood_calls <= 400.0
            && full.mean_likelihood_calls >= 2000.0
            && (80.0..=300.0).contains(&red.mean_gradient_calls);
        Ok((
            ok,
            format!(
                "reduced likelihood calls {:.1} (<= 400), gradient calls {:.1} (in [80, 300]); full likelihood calls {:.1} (>= 2000)",
                red.mean_likelihood_calls, red.mean_gradient_calls, full.mean_likelihood_calls
            ),
        ))
    }

    fn rank_collapse(&self) -> Result<(bool, String)> {
        let mut ok = true;
        let mut parts = Vec::new();
        for d in STUDY_DIMS {
            let report = self.study(Method::Cebured, d, 1.0)?;
            let modal = report.aggregate.modal_first_rank;
            let later_max = report
                .repeats
                .iter()
                .flat_map(|r| r.steps.iter().skip(1).filter_map(|s| s.rank))
                .max();
            ok &= matches!(modal, Some(1 | 2));
            parts.push(format!(
                "d={d}: modal {} (max later {})",
                fmt_rank(modal),
                fmt_rank(later_max)
            ));
        }
        Ok((ok, format!("first-step rank {}", parts.join(", "))))
    }

    fn step_counts(&self) -> Result<(bool, String)> {
        let mut ok = true;
        let mut parts = Vec::new();
        for d in STUDY_DIMS {
            let a = self.study(Method::Cebured, d, 1.0)?.aggregate.clone();
            let frac = a.step_fraction(3, 5);
            ok &= frac >= 0.8;
            parts.push(format!(
                "d={d}: {:.0}% {:?}",
                100.0 * frac,
                a.step_histogram
            ));
        }
        Ok((
            ok,
            format!("runs with 3-5 steps (gate 80%) {}", parts.join(", ")),
        ))
    }

    fn evidence(&self) -> Result<(bool, String)> {
        let red = self.study(Method::Cebured, 25, 1.0)?.aggregate.clone();
        let full = self.study(Method::Cebu, 25, 1.0)?.aggregate.clone();
        let ok =
            red.mean_log_evidence_error.abs() < 0.2 && full.mean_log_evidence_error.abs() < 0.2;
        Ok((
            ok,
            format!(
                "mean ln Z error reduced {:+.4}, full {:+.4} (gate 0.2 nats)",
                red.mean_log_evidence_error, full.mean_log_evidence_error
            ),
        ))
    }

    fn threshold(&self) -> Result<(bool, String)> {
        let loose = self.study(Method::Cebured, 100, 1.0)?.aggregate.clone();
        let tight = self.study(Method::Cebured, 100, 1e-2)?.aggregate.clone();
        let pooled_se =
            ((loose.eps_mu_sd.powi(2) + tight.eps_mu_sd.powi(2)) / loose.repeats as f64).sqrt();
        let ok = tight.eps_mu_mean <= loose.eps_mu_mean + pooled_se
            && tight.mean_final_ness >= loose.mean_final_ness - 0.05;
        Ok((
            ok,
            format!(
                "eps_mu {:.4} at 1e-2 vs {:.4} + {:.4} at 1; final nESS {:.3} at 1e-2 vs {:.3} - 0.05 at 1",
                tight.eps_mu_mean, loose.eps_mu_mean, pooled_se, tight.mean_final_ness, loose.mean_final_ness
            ),
        ))
    }

    fn properties(&self) -> Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.options.seed ^ 0x9e37);
        let checks: [(&str, Result<(bool, String)>); 8] = [
            ("orthonormality", orthonormality(&mut rng)),
            ("cancellation", cancellation(&mut rng)),
            ("gradient", gradient_fd(&mut rng)),
            ("nESS", ness_invariance(&mut rng)),
            ("rank", rank_monotone(&mut rng)),
            ("fit", fit_round_trip(&mut rng)),
            ("KLD", kld_bound(&mut rng)),
            ("calls", call_accounting(self.options.seed)),
        ];
        let mut ok = true;
        let mut parts = Vec::new();
        for (name, r) in checks {
            let (p, d) = r.unwrap_or_else(|e| (false, format!("error: {e:#}")));
            ok &= p;
            parts.push(format!("{name} {} {d}", if p { "ok" } else { "FAILED" }));
        }
        Ok((ok, parts.join("; ")))
    }
}

fn fmt_rank(r: Option<usize>) -> String {
    r.map_or_else(|| "-".into(), |r| r.to_string())
}

fn standard_normal_vector<R: Rng>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

/// Literal multivariate normal log-density via LU inverse and determinant.
fn dense_mvn_logpdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let lu = cov.clone().lu();
    let log_det: f64 = lu.u().diagonal().iter().map(|v| v.abs().ln()).sum();
    let inv = lu.try_inverse().expect("non-singular covariance");
    let r = x - mean;
    -0.5 * (x.len() as f64 * LN_2PI + log_det + (r.transpose() * inv * &r)[(0, 0)])
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

fn random_orthonormal<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| rng.sample(StandardNormal))
        .qr()
        .q()
}

fn random_gaussian<R: Rng>(k: usize, rng: &mut R) -> Result<GaussianParams> {
    let a = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let cov = &a * a.transpose() + DMatrix::identity(k, k) * 0.5;
    Ok(GaussianParams::new(standard_normal_vector(k, rng), cov)?)
}

fn orthonormality(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let p = BeamProblem::new(BeamConfig::with_dim(50))?;
    let settings = AdaptHSettings::new(6.0, 1.0, 1.0 / 3.25);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let out = adapt_h(
            &p,
            &GaussianParams::standard(50),
            &SubspaceBasis::identity(50),
            0.0,
            true,
            &settings,
            rng,
        )?;
        worst = worst.max(out.basis.orthonormality_error());
    }
    for _ in 0..5 {
        let basis = SubspaceBasis::from_spectrum(&Spectrum::of(&random_spd(30, rng)), 4)?;
        worst = worst.max(basis.orthonormality_error());
    }
    Ok((worst <= 1e-10, format!("{worst:.1e}")))
}

fn random_spd<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    &a * a.transpose()
}

fn cancellation(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (d, r, n) = (12, 3, 50);
    let q = random_orthonormal(d, rng);
    let basis = SubspaceBasis::new(
        q.columns(0, r).into_owned(),
        q.columns(r, d - r).into_owned(),
    )?;
    let params = random_gaussian(r, rng)?;
    let adjusted = adjust_density(&params, &basis, &basis)?;
    let u_r = params.sample(n, rng);
    let u_perp = DMatrix::from_fn(n, d - r, |_, _| rng.sample(StandardNormal));
    let log_lik: Vec<f64> = (0..n).map(|_| -rng.random::<f64>() * 10.0).collect();
    let beta = 0.37;
    let full = adjusted_weights(&u_r, &u_perp, &log_lik, beta, &adjusted)?;
    let reduced = h_weights(&log_lik, &u_r, &params, beta)?;
    let worst = full
        .iter()
        .zip(&reduced)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max);
    Ok((worst <= 1e-10, format!("{worst:.1e}")))
}

fn gradient_fd(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let d = 25;
    let p = BeamProblem::new(BeamConfig::with_dim(d))?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let u = standard_normal_vector(d, rng);
        let (_, g) = p.log_likelihood_and_gradient(&u);
        let fd = DVector::from_fn(d, |j, _| {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[j] += h;
            dn[j] -= h;
            (p.log_likelihood(&up) - p.log_likelihood(&dn)) / (2.0 * h)
        });
        worst = worst.max((&g - &fd).norm() / g.norm());
    }
    Ok((worst <= 1e-5, format!("{worst:.1e}")))
}

fn ness_invariance(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let log_w: Vec<f64> = (0..200)
            .map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let base = ness(&log_w)?;
        for c in [-700.0, -1.0, 2.5, 700.0] {
            let shifted: Vec<f64> = log_w.iter().map(|l| l + c).collect();
            worst = worst.max((ness(&shifted)? - base).abs());
        }
    }
    Ok((worst <= 1e-12, format!("{worst:.1e}")))
}

fn rank_monotone(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let epsilons = [10.0, 1.0, 0.3, 0.1, 1e-2, 1e-3, 1e-6, 0.0];
    let mut ok = true;
    for _ in 0..200 {
        let d = rng.random_range(1..40);
        let mut eig: Vec<f64> = (0..d).map(|_| rng.random::<f64>().powi(4) * 50.0).collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let ranks: Vec<usize> = epsilons.iter().map(|&e| select_rank(&eig, e)).collect();
        ok &= ranks.windows(2).all(|w| w[0] <= w[1]) && ranks.iter().all(|&r| (1..=d).contains(&r));
    }
    Ok((ok, "200 spectra".into()))
}

fn fit_round_trip(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let k = 4;
    let n = 200_000;
    let truth = random_gaussian(k, rng)?;
    let x = truth.sample(n, rng);
    let fit = weighted_fit(&x, &vec![0.0; n])?;
    let (m, s) = (truth.mean(), truth.cov());
    let mut worst: f64 = 0.0;
    for i in 0..k {
        worst = worst.max((fit.mean()[i] - m[i]).abs() / (s[(i, i)] / n as f64).sqrt());
        for j in 0..k {
            let se = ((s[(i, i)] * s[(j, j)] + s[(i, j)].powi(2)) / n as f64).sqrt();
            worst = worst.max((fit.cov()[(i, j)] - s[(i, j)]).abs() / se);
        }
    }
    // weights equal to the density ratio turn draws from the truth into draws from a shifted target
    let target = GaussianParams::new(m + DVector::from_element(k, 0.2), s.clone())?;
    let log_w: Vec<f64> = (0..n)
        .map(|r| {
            let xr: Vec<f64> = x.row(r).iter().copied().collect();
            target.log_pdf(&xr) - truth.log_pdf(&xr)
        })
        .collect();
    let shifted = weighted_fit(&x, &log_w)?;
    let shift_err = (shifted.mean() - target.mean()).amax();
    Ok((
        worst < 5.0 && shift_err < 0.05,
        format!("max {worst:.2} SE, reweighted mean err {shift_err:.1e}"),
    ))
}

fn kld_bound(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (d, m, sigma) = (8, 4, 0.4);
    let scales = [3.0, 1.5, 0.6, 0.2];
    let g = DMatrix::from_fn(m, d, |i, _| {
        scales[i] * rng.sample::<f64, _>(StandardNormal)
    });
    let y = standard_normal_vector(m, rng);
    let toy = LinearGaussianToy::new(g.clone(), y.clone(), sigma)?;
    let post = toy.analytic_posterior()?;
    let spectrum = Spectrum::of(&toy.exact_h(1.0)?);
    let mut ok = true;
    let mut parts = Vec::new();
    for r in [1, 2, 3] {
        let basis = SubspaceBasis::from_spectrum(&spectrum, r)?;
        let (phi_r, phi_p) = (basis.phi_r(), basis.phi_perp());
        // complementary directions integrated into the noise
        let gp = &g * phi_p;
        let noise = DMatrix::<f64>::identity(m, m) * sigma * sigma + &gp * gp.transpose();
        let noise_inv = noise
            .try_inverse()
            .ok_or_else(|| anyhow!("singular reduced noise"))?;
        let gr = &g * phi_r;
        let cov_r = (DMatrix::<f64>::identity(r, r) + gr.transpose() * &noise_inv * &gr)
            .try_inverse()
            .ok_or_else(|| anyhow!("singular reduced precision"))?;
        let mean = phi_r * (&cov_r * gr.transpose() * &noise_inv * &y);
        let cov = phi_r * cov_r * phi_r.transpose() + phi_p * phi_p.transpose();
        let kl = gaussian_kl(post.mean(), post.cov(), &mean, &cov)?;
        let bound = 0.5 * spectrum.eigenvalues.iter().skip(r).sum::<f64>();
        ok &= kl >= -1e-12 && kl <= bound + 1e-10;
        parts.push(format!("r={r} {kl:.2e}<={bound:.2e}"));
    }
    Ok((ok, parts.join(" ")))
}

/// KL(N(m0, S0) ‖ N(m1, S1)).
fn gaussian_kl(
    m0: &DVector<f64>,
    s0: &DMatrix<f64>,
    m1: &DVector<f64>,
    s1: &DMatrix<f64>,
) -> Result<f64> {
    let k = m0.len() as f64;
    let s1_inv = s1
        .clone()
        .try_inverse()
        .ok_or_else(|| anyhow!("singular covariance"))?;
    let dm = m1 - m0;
    let ld = |s: &DMatrix<f64>| {
        s.clone()
            .lu()
            .u()
            .diagonal()
            .iter()
            .map(|v| v.abs().ln())
            .sum::<f64>()
    };
    Ok(0.5
        * ((&s1_inv * s0).trace() + (dm.transpose() * &s1_inv * &dm)[(0, 0)] - k + ld(s1) - ld(s0)))
}

fn call_accounting(seed: u64) -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for method in [Method::Cebu, Method::Cebured] {
        let cfg = RunConfig {
            method,
            d: 25,
            seed,
            ..RunConfig::default()
        };
        let problem = cfg.build_problem()?;
        let (res, counts) = run_once(&cfg, &problem, 0)?;
        let steps_lik: u64 = res.steps.iter().map(|s| s.likelihood_calls as u64).sum();
        let steps_grad: u64 = res.steps.iter().map(|s| s.gradient_calls as u64).sum();
        let predicted_lik = steps_lik + res.n_final as u64;
        ok &= counts.likelihood == predicted_lik && counts.gradient == steps_grad;
        if method == Method::Cebu {
            let n = cfg.n_per_level as u64;
            ok &= counts.likelihood == res.num_steps() as u64 * n + n && counts.gradient == 0;
        }
        parts.push(format!(
            "{method} {}/{}",
            counts.likelihood, counts.gradient
        ));
    }
    Ok((ok, parts.join(" ")))
}
