//! Cross-entropy importance sampling with likelihood tempering in the full
//! standard-normal space.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ce_fit::{weighted_fit, GaussianParams, LogDensity};
use crate::error::{Error, Result};
use crate::field_prior::log_std_normal;
use crate::linalg::row_vector;
use crate::problem::{log_likelihoods, to_physical_rows, InverseProblem};
use crate::tempering::{
    log_evidence_estimate, ness, normalized_weights, resample, Resampler, TemperState,
};

/// Diagnostics of one tempering level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub beta: f64,
    /// Samples used for the fit at this level.
    pub n_samples: usize,
    /// nESS of the fit weights.
    pub ness: f64,
    /// Selected LIS rank (reduced runs only).
    pub rank: Option<usize>,
    /// Gradient samples (reduced runs only).
    pub n_h: Option<usize>,
    pub inner_iterations: Option<usize>,
    pub likelihood_calls: usize,
    pub gradient_calls: usize,
}

/// Output of a sampler run.
#[derive(Clone, Debug)]
pub struct PosteriorResult {
    /// `N × d` resampled posterior samples in physical space.
    pub samples: DMatrix<f64>,
    pub log_evidence: f64,
    pub steps: Vec<StepRecord>,
    /// nESS of the final importance weights.
    pub final_ness: f64,
    /// Samples drawn for the final reweighting.
    pub n_final: usize,
    pub likelihood_calls: usize,
    pub gradient_calls: usize,
}

impl PosteriorResult {
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    /// Per-coordinate sample mean and (1/N) variance of `samples`.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        crate::metrics::sample_moments(&self.samples)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CebuSettings {
    pub n_per_level: usize,
    pub target_ness: f64,
    /// Number of resampled posterior samples `N`.
    pub n_posterior: usize,
    pub max_steps: usize,
    pub resampler: Resampler,
}

impl Default for CebuSettings {
    fn default() -> Self {
        Self {
            n_per_level: 1000,
            target_ness: crate::tempering::target_ness_from_cv(1.5),
            n_posterior: 1000,
            max_steps: 50,
            resampler: Resampler::Stratified,
        }
    }
}

/// Final importance weights against a biasing density, evidence and resampled
/// physical-space posterior samples.
pub(crate) struct FinalStage {
    pub samples: DMatrix<f64>,
    pub log_evidence: f64,
    pub ness: f64,
}

pub(crate) fn finalize<P, R>(
    problem: &P,
    u: &DMatrix<f64>,
    log_w_final: &[f64],
    n_posterior: usize,
    resampler: Resampler,
    rng: &mut R,
) -> Result<FinalStage>
where
    P: InverseProblem + ?Sized,
    R: Rng + ?Sized,
{
    let log_evidence = log_evidence_estimate(log_w_final);
    let norm_w = normalized_weights(log_w_final)?;
    let posterior_u = resample(u, &norm_w, n_posterior, resampler, rng)?;
    Ok(FinalStage {
        samples: to_physical_rows(problem, &posterior_u),
        log_evidence,
        ness: ness(log_w_final)?,
    })
}

/// Runs tempered cross-entropy updating with a full-rank Gaussian biasing density.
pub fn run_cebu<P, R>(problem: &P, settings: &CebuSettings, rng: &mut R) -> Result<PosteriorResult>
where
    P: InverseProblem + ?Sized,
    R: Rng + ?Sized,
{
    let d = problem.dim();
    if settings.n_per_level < d + 2 {
        return Err(Error::InvalidParameter(format!(
            "{} samples per level cannot fit a {d}-dimensional Gaussian",
            settings.n_per_level
        )));
    }
    if settings.n_posterior == 0 {
        return Err(Error::InvalidParameter(
            "need at least one posterior sample".into(),
        ));
    }
    let n = settings.n_per_level;
    let mut params = GaussianParams::standard(d);
    let mut beta = 0.0;
    let mut steps = Vec::new();

    while beta < 1.0 {
        if steps.len() == settings.max_steps {
            return Err(Error::MaxStepsExceeded {
                max_steps: settings.max_steps,
                beta,
            });
        }
        let u = params.sample(n, rng);
        let state = TemperState::advance(log_likelihoods(problem, &u), beta, settings.target_ness)?;
        params = weighted_fit(&u, &state.log_w)?;
        beta = state.beta;
        log::debug!("cebu step {}: beta = {beta:.6}", steps.len() + 1);
        steps.push(StepRecord {
            beta,
            n_samples: n,
            ness: state.ness()?,
            rank: None,
            n_h: None,
            inner_iterations: None,
            likelihood_calls: n,
            gradient_calls: 0,
        });
    }

    let u = params.sample(n, rng);
    let log_lik = log_likelihoods(problem, &u);
    let log_w: Vec<f64> = (0..n)
        .map(|k| {
            let x = row_vector(&u, k);
            log_lik[k] + log_std_normal(x.as_slice()) - params.log_pdf(x.as_slice())
        })
        .collect();
    let fin = finalize(
        problem,
        &u,
        &log_w,
        settings.n_posterior,
        settings.resampler,
        rng,
    )?;
    Ok(PosteriorResult {
        samples: fin.samples,
        log_evidence: fin.log_evidence,
        likelihood_calls: n * (steps.len() + 1),
        gradient_calls: 0,
        steps,
        final_ness: fin.ness,
        n_final: n,
    })
}
