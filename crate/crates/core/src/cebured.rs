//! Cross-entropy importance sampling in a likelihood-informed subspace that
//! is re-estimated at every tempering level from gradient information.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ce_fit::{weighted_fit, GaussianParams, LogDensity};
use crate::cebu::{finalize, PosteriorResult, StepRecord};
use crate::error::{Error, Result};
use crate::field_prior::log_std_normal;
use crate::linalg::{row_vector, vstack};
use crate::problem::{log_likelihoods, GradientProblem};
use crate::subspace::{
    adapt_h, adjust_density, adjusted_weights, draw_reduced, n_samples_heuristic, AdaptHSettings,
    SubspaceBasis,
};
use crate::tempering::{ness, Resampler};

/// Times a degenerate level fit is retried with an enlarged sample.
const DEGENERACY_RETRIES: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CebuRedSettings {
    pub target_ness: f64,
    pub alpha_h: f64,
    pub alpha_par: f64,
    pub epsilon: f64,
    /// Number of resampled posterior samples `N`.
    pub n_posterior: usize,
    /// Fresh samples drawn from the final density for reweighting; the level
    /// size `n(r)` of the final rank when unset.
    pub n_final: Option<usize>,
    pub max_steps: usize,
    pub max_inner_iterations: usize,
    /// Largest admissible level size `n(r)`.
    pub sample_cap: usize,
    pub resampler: Resampler,
}

impl Default for CebuRedSettings {
    fn default() -> Self {
        Self {
            target_ness: crate::tempering::target_ness_from_cv(1.5),
            alpha_h: 6.0,
            alpha_par: 4.0,
            epsilon: 1.0,
            n_posterior: 1000,
            n_final: None,
            max_steps: 50,
            max_inner_iterations: 20,
            sample_cap: 20_000,
            resampler: Resampler::Stratified,
        }
    }
}

impl CebuRedSettings {
    /// Weight coefficient of variation `δ_w` implied by the target nESS.
    pub fn target_delta_w(&self) -> f64 {
        (1.0 / self.target_ness - 1.0).sqrt()
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.alpha_h > 0.0 && self.alpha_par > 0.0) {
            return Err(Error::InvalidParameter(
                "fudge factors must be positive".into(),
            ));
        }
        if !(self.target_ness > 0.0 && self.target_ness < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "target nESS must lie in (0, 1), got {}",
                self.target_ness
            )));
        }
        if self.n_posterior == 0 || self.n_final == Some(0) {
            return Err(Error::InvalidParameter(
                "sample counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Final biasing density and basis of a reduced run.
#[derive(Clone, Debug)]
pub struct ReducedState {
    pub params: GaussianParams,
    pub basis: SubspaceBasis,
}

/// Log-weights `ln L̃ + ln φ_r(ū_r) − ln q^{(r)}(ū_r)` of ambient samples drawn
/// from `q^{(r)} φ_{d−r}` in `basis`; the complementary factor cancels.
pub fn final_log_weights(
    log_lik: &[f64],
    u: &DMatrix<f64>,
    params: &GaussianParams,
    basis: &SubspaceBasis,
) -> Vec<f64> {
    let (u_r, _) = basis.project(u);
    (0..log_lik.len())
        .map(|k| {
            let x = row_vector(&u_r, k);
            log_lik[k] + log_std_normal(x.as_slice()) - params.log_pdf(x.as_slice())
        })
        .collect()
}

/// Runs dimension-reduced tempered cross-entropy updating.
pub fn run_cebured<P, R>(
    problem: &P,
    settings: &CebuRedSettings,
    rng: &mut R,
) -> Result<PosteriorResult>
where
    P: GradientProblem + ?Sized,
    R: Rng + ?Sized,
{
    run_cebured_with_state(problem, settings, rng).map(|(res, _)| res)
}

/// As [`run_cebured`], also returning the final density and basis.
pub fn run_cebured_with_state<P, R>(
    problem: &P,
    settings: &CebuRedSettings,
    rng: &mut R,
) -> Result<(PosteriorResult, ReducedState)>
where
    P: GradientProblem + ?Sized,
    R: Rng + ?Sized,
{
    settings.validate()?;
    let d = problem.dim();
    let delta_w = settings.target_delta_w();
    let adapt = AdaptHSettings {
        alpha_h: settings.alpha_h,
        epsilon: settings.epsilon,
        target_ness: settings.target_ness,
        max_inner_iterations: settings.max_inner_iterations,
    };
    let mut params = GaussianParams::standard(d);
    let mut basis = SubspaceBasis::identity(d);
    let mut beta = 0.0;
    let mut steps: Vec<StepRecord> = Vec::new();

    while beta < 1.0 {
        if steps.len() == settings.max_steps {
            return Err(Error::MaxStepsExceeded {
                max_steps: settings.max_steps,
                beta,
            });
        }
        let out = adapt_h(
            problem,
            &params,
            &basis,
            beta,
            steps.is_empty(),
            &adapt,
            rng,
        )?;
        let n = n_samples_heuristic(settings.alpha_par, out.rank, delta_w);
        if n > settings.sample_cap {
            return Err(Error::RankExceededBudget {
                rank: out.rank,
                needed: n,
                cap: settings.sample_cap,
            });
        }
        let mut extra = n.saturating_sub(out.n_h);
        let mut samples = out.samples;
        let mut log_lik = out.log_lik;
        if extra > 0 {
            let added = draw_reduced(&params, &basis, extra, rng);
            log_lik.extend(log_likelihoods(problem, &added));
            samples = vstack(&samples, &added);
        }
        let q_adj = adjust_density(&params, &basis, &out.basis)?;
        let mut retries = 0;
        let (fitted, log_w) = loop {
            let (u_r, u_perp) = out.basis.project(&samples);
            let log_w = adjusted_weights(&u_r, &u_perp, &log_lik, out.beta, &q_adj)?;
            match weighted_fit(&u_r, &log_w) {
                Ok(fitted) => break (fitted, log_w),
                Err(Error::WeightDegeneracy { ess }) if retries < DEGENERACY_RETRIES => {
                    // grow the level from the same density and refit
                    retries += 1;
                    let grow = n.max(out.n_h);
                    log::debug!("level fit degenerate (ESS {ess:.3}); drawing {grow} more samples");
                    let added = draw_reduced(&params, &basis, grow, rng);
                    log_lik.extend(log_likelihoods(problem, &added));
                    samples = vstack(&samples, &added);
                    extra += grow;
                }
                Err(e) => return Err(e),
            }
        };
        params = fitted;
        basis = out.basis;
        beta = out.beta;
        log::debug!(
            "cebured step {}: beta = {beta:.6}, r = {}, n_H = {}",
            steps.len() + 1,
            out.rank,
            out.n_h
        );
        steps.push(StepRecord {
            beta,
            n_samples: log_lik.len(),
            ness: ness(&log_w)?,
            rank: Some(out.rank),
            n_h: Some(out.n_h),
            inner_iterations: Some(out.inner_iterations),
            likelihood_calls: out.n_h + extra,
            gradient_calls: out.n_h,
        });
    }

    let r_final = basis.rank();
    let n_final = settings
        .n_final
        .unwrap_or_else(|| n_samples_heuristic(settings.alpha_par, r_final, delta_w));
    let u = draw_reduced(&params, &basis, n_final, rng);
    let log_lik = log_likelihoods(problem, &u);
    let log_w = final_log_weights(&log_lik, &u, &params, &basis);
    let fin = finalize(
        problem,
        &u,
        &log_w,
        settings.n_posterior,
        settings.resampler,
        rng,
    )?;
    let likelihood_calls = steps.iter().map(|s| s.likelihood_calls).sum::<usize>() + n_final;
    let gradient_calls = steps.iter().map(|s| s.gradient_calls).sum();
    Ok((
        PosteriorResult {
            samples: fin.samples,
            log_evidence: fin.log_evidence,
            steps,
            final_ness: fin.ness,
            n_final,
            likelihood_calls,
            gradient_calls,
        },
        ReducedState { params, basis },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ce_fit::LogDensity;
    use crate::field_prior::log_std_normal;
    use crate::problem::{Counted, InverseProblem};
    use crate::toy::LinearGaussianToy;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn active_coordinate_recovers_scalar_conjugate_posterior() {
        let d = 20;
        let toy = LinearGaussianToy::active_coordinate(d, 1.0, 1.0).unwrap();
        let settings = CebuRedSettings {
            n_final: Some(2000),
            n_posterior: 2000,
            ..CebuRedSettings::default()
        };
        let (mut means, mut vars) = (vec![], vec![]);
        for seed in 0..20 {
            let (res, state) =
                run_cebured_with_state(&toy, &settings, &mut ChaCha8Rng::seed_from_u64(seed))
                    .unwrap();
            assert!(res.steps.iter().all(|s| s.rank == Some(1)));
            assert!(state.basis.phi_r()[(0, 0)].abs() > 0.99);
            let (m, v) = res.moments();
            means.push(m[0]);
            vars.push(v[0]);
        }
        let avg = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let se_mean = (0.5f64 / 600.0 / 20.0).sqrt();
        let se_var = 0.5 * (2.0f64 / 600.0 / 20.0).sqrt();
        assert!(
            (avg(&means) - 0.5).abs() < 3.0 * se_mean,
            "mean {}",
            avg(&means)
        );
        assert!(
            (avg(&vars) - 0.5).abs() < 3.0 * se_var,
            "var {}",
            avg(&vars)
        );
    }

    #[test]
    fn call_accounting_matches_counters() {
        let toy = LinearGaussianToy::active_coordinate(30, 2.0, 0.05).unwrap();
        let counted = Counted::new(&toy);
        let res = run_cebured(
            &counted,
            &CebuRedSettings::default(),
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        let c = counted.counts();
        assert_eq!(c.likelihood as usize, res.likelihood_calls);
        assert_eq!(c.gradient as usize, res.gradient_calls);
        for s in &res.steps {
            let n = n_samples_heuristic(4.0, s.rank.unwrap(), 1.5);
            assert_eq!(
                s.likelihood_calls - s.gradient_calls,
                s.n_samples - s.n_h.unwrap()
            );
            assert!(s.n_samples >= n.max(s.n_h.unwrap()));
        }
        assert!(res.steps.windows(2).all(|w| w[1].beta > w[0].beta));
        assert_eq!(res.steps.last().unwrap().beta, 1.0);
    }

    #[test]
    fn final_weights_match_full_ratio() {
        let d = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let toy = LinearGaussianToy::new(
            DMatrix::from_fn(2, d, |i, j| ((i + 1) * (j + 2)) as f64 * 0.1),
            DVector::from_vec(vec![0.4, -0.3]),
            0.5,
        )
        .unwrap();
        let q = nalgebra::DMatrix::<f64>::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5)
            .qr()
            .q();
        let basis = SubspaceBasis::new(
            q.columns(0, 2).into_owned(),
            q.columns(2, d - 2).into_owned(),
        )
        .unwrap();
        let params = GaussianParams::new(
            DVector::from_vec(vec![0.3, -0.2]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]),
        )
        .unwrap();
        let u = draw_reduced(&params, &basis, 40, &mut rng);
        let ll = log_likelihoods(&toy, &u);
        let reduced = final_log_weights(&ll, &u, &params, &basis);
        // full ratio L φ_d / (q^{(r)} φ_{d−r}) evaluated in ambient coordinates
        let (u_r, u_p) = basis.project(&u);
        for k in 0..40 {
            let x = row_vector(&u, k);
            let full = ll[k] + log_std_normal(x.as_slice())
                - params.log_pdf(row_vector(&u_r, k).as_slice())
                - log_std_normal(row_vector(&u_p, k).as_slice());
            assert!((full - reduced[k]).abs() <= 1e-10 * full.abs().max(1.0));
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let toy = LinearGaussianToy::active_coordinate(10, 1.5, 0.2).unwrap();
        let s = CebuRedSettings::default();
        let a = run_cebured(&toy, &s, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = run_cebured(&toy, &s, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.steps, b.steps);
        assert_eq!(a.log_evidence, b.log_evidence);
    }

    #[test]
    fn sample_cap_and_settings_enforced() {
        let toy = LinearGaussianToy::active_coordinate(5, 1.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let capped = CebuRedSettings {
            sample_cap: 10,
            ..CebuRedSettings::default()
        };
        assert!(matches!(
            run_cebured(&toy, &capped, &mut rng),
            Err(Error::RankExceededBudget { .. })
        ));
        let bad = CebuRedSettings {
            epsilon: 0.0,
            ..CebuRedSettings::default()
        };
        assert!(run_cebured(&toy, &bad, &mut rng).is_err());
        assert_eq!(toy.dim(), 5);
    }
}
