//! Study configuration, repeated runs with derived seeds and aggregated reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{BeamConfig, BeamProblem};
use crate::cebu::{run_cebu, CebuSettings, PosteriorResult, StepRecord};
use crate::cebured::{run_cebured, CebuRedSettings};
use crate::error::{Error, Result};
use crate::metrics::{mean_and_sd, relative_errors};
use crate::problem::{Counted, GradientProblem, InverseProblem};
use crate::tempering::{target_ness_from_cv, Resampler};
use crate::toy::LinearGaussianToy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cebu,
    Cebured,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cebu" => Ok(Self::Cebu),
            "cebured" => Ok(Self::Cebured),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected cebu or cebured)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Cebu => "cebu",
            Self::Cebured => "cebured",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Beam,
    /// Scalar conjugate problem: prior `N(0, 1)`, one observation `y` with noise `σ`.
    Toy1d,
    /// `d`-dimensional problem observing only the first coordinate.
    ToyActiveCoordinate,
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "beam" => Ok(Self::Beam),
            "toy-1d" => Ok(Self::Toy1d),
            "toy-active-coordinate" => Ok(Self::ToyActiveCoordinate),
            other => Err(Error::Config(format!("unknown problem '{other}'"))),
        }
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Beam => "beam",
            Self::Toy1d => "toy-1d",
            Self::ToyActiveCoordinate => "toy-active-coordinate",
        })
    }
}

/// Every setting of a study. Serialized as flat `key = value` lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: Method,
    pub problem: ProblemKind,
    pub d: usize,
    pub n_per_level: usize,
    pub target_delta_w: f64,
    pub alpha_h: f64,
    pub alpha_par: f64,
    pub epsilon: f64,
    pub n_posterior: usize,
    /// Final reweighting sample size for reduced runs; `n(r)` when unset.
    pub n_final: Option<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub max_steps: usize,
    pub resampler: Resampler,
    pub beam: BeamConfig,
    pub toy_y: f64,
    pub toy_noise_sd: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::Cebured,
            problem: ProblemKind::Beam,
            d: 100,
            n_per_level: 1000,
            target_delta_w: 1.5,
            alpha_h: 6.0,
            alpha_par: 4.0,
            epsilon: 1.0,
            n_posterior: 1000,
            n_final: None,
            repeats: 20,
            seed: 0,
            max_steps: 50,
            resampler: Resampler::Stratified,
            beam: BeamConfig::default(),
            toy_y: 1.0,
            toy_noise_sd: 1.0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse '{value}' for key '{key}'")))
}

impl RunConfig {
    /// Keys accepted by [`RunConfig::set`], in output order.
    pub const KEYS: [&'static str; 27] = [
        "method",
        "problem",
        "d",
        "n_per_level",
        "target_delta_w",
        "alpha_h",
        "alpha_par",
        "epsilon",
        "n_posterior",
        "n_final",
        "repeats",
        "seed",
        "max_steps",
        "resampler",
        "length",
        "load",
        "flex_mean",
        "flex_sd",
        "flex_corr_length",
        "n_obs",
        "noise_sd",
        "noise_corr_length",
        "truth_resolution",
        "data_seed",
        "toy_y",
        "toy_noise_sd",
        "jobs",
    ];

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "method" => self.method = value.parse()?,
            "problem" => self.problem = value.parse()?,
            "d" => self.d = parse(key, value)?,
            "n_per_level" => self.n_per_level = parse(key, value)?,
            "target_delta_w" => self.target_delta_w = parse(key, value)?,
            "alpha_h" => self.alpha_h = parse(key, value)?,
            "alpha_par" => self.alpha_par = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "n_posterior" | "N" => self.n_posterior = parse(key, value)?,
            "n_final" => {
                self.n_final = match value {
                    "" | "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "repeats" => self.repeats = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "max_steps" => self.max_steps = parse(key, value)?,
            "resampler" => self.resampler = value.parse()?,
            "length" => self.beam.length = parse(key, value)?,
            "load" => self.beam.load = parse(key, value)?,
            "flex_mean" => self.beam.flex_mean = parse(key, value)?,
            "flex_sd" => self.beam.flex_sd = parse(key, value)?,
            "flex_corr_length" => self.beam.flex_corr_length = parse(key, value)?,
            "n_obs" => self.beam.n_obs = parse(key, value)?,
            "noise_sd" => self.beam.noise_sd = parse(key, value)?,
            "noise_corr_length" => self.beam.noise_corr_length = parse(key, value)?,
            "truth_resolution" => self.beam.truth_resolution = parse(key, value)?,
            "data_seed" => self.beam.data_seed = parse(key, value)?,
            "toy_y" => self.toy_y = parse(key, value)?,
            "toy_noise_sd" => self.toy_noise_sd = parse(key, value)?,
            // runtime setting handled by the caller
            "jobs" => {}
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    /// Renders the configuration in the format read by [`RunConfig::parse_str`].
    pub fn to_kv_string(&self) -> String {
        let b = &self.beam;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("method", self.method.to_string());
        put("problem", self.problem.to_string());
        put("d", self.d.to_string());
        put("n_per_level", self.n_per_level.to_string());
        put("target_delta_w", self.target_delta_w.to_string());
        put("alpha_h", self.alpha_h.to_string());
        put("alpha_par", self.alpha_par.to_string());
        put("epsilon", self.epsilon.to_string());
        put("n_posterior", self.n_posterior.to_string());
        put(
            "n_final",
            self.n_final.map_or("auto".into(), |n| n.to_string()),
        );
        put("repeats", self.repeats.to_string());
        put("seed", self.seed.to_string());
        put("max_steps", self.max_steps.to_string());
        put("resampler", self.resampler.to_string());
        put("length", b.length.to_string());
        put("load", b.load.to_string());
        put("flex_mean", b.flex_mean.to_string());
        put("flex_sd", b.flex_sd.to_string());
        put("flex_corr_length", b.flex_corr_length.to_string());
        put("n_obs", b.n_obs.to_string());
        put("noise_sd", b.noise_sd.to_string());
        put("noise_corr_length", b.noise_corr_length.to_string());
        put("truth_resolution", b.truth_resolution.to_string());
        put("data_seed", b.data_seed.to_string());
        put("toy_y", self.toy_y.to_string());
        put("toy_noise_sd", self.toy_noise_sd.to_string());
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if !(self.target_delta_w > 0.0) {
            return Err(Error::Config("target_delta_w must be positive".into()));
        }
        if self.method == Method::Cebured && !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.d == 0 {
            return Err(Error::Config("d must be positive".into()));
        }
        Ok(())
    }

    pub fn target_ness(&self) -> f64 {
        target_ness_from_cv(self.target_delta_w)
    }

    pub fn cebu_settings(&self) -> CebuSettings {
        CebuSettings {
            n_per_level: self.n_per_level,
            target_ness: self.target_ness(),
            n_posterior: self.n_posterior,
            max_steps: self.max_steps,
            resampler: self.resampler,
        }
    }

    pub fn cebured_settings(&self) -> CebuRedSettings {
        CebuRedSettings {
            target_ness: self.target_ness(),
            alpha_h: self.alpha_h,
            alpha_par: self.alpha_par,
            epsilon: self.epsilon,
            n_posterior: self.n_posterior,
            n_final: self.n_final,
            max_steps: self.max_steps,
            resampler: self.resampler,
            ..CebuRedSettings::default()
        }
    }

    /// Builds the configured problem.
    pub fn build_problem(&self) -> Result<StudyProblem> {
        Ok(match self.problem {
            ProblemKind::Beam => StudyProblem::Beam(BeamProblem::new(BeamConfig {
                d: self.d,
                ..self.beam.clone()
            })?),
            ProblemKind::Toy1d => StudyProblem::Toy(LinearGaussianToy::active_coordinate(
                1,
                self.toy_y,
                self.toy_noise_sd,
            )?),
            ProblemKind::ToyActiveCoordinate => StudyProblem::Toy(
                LinearGaussianToy::active_coordinate(self.d, self.toy_y, self.toy_noise_sd)?,
            ),
        })
    }
}

/// Closed-form posterior moments (physical space) and log-evidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub log_evidence: f64,
}

/// Any problem a study can run on.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum StudyProblem {
    Beam(BeamProblem),
    Toy(LinearGaussianToy),
}

impl StudyProblem {
    pub fn reference(&self) -> Result<Reference> {
        let (post, log_evidence) = match self {
            Self::Beam(p) => (p.analytic_posterior()?, p.analytic_log_evidence()?),
            Self::Toy(p) => (p.analytic_posterior()?, p.analytic_log_evidence()?),
        };
        Ok(Reference {
            mean: post.mean().iter().copied().collect(),
            var: post.cov().diagonal().iter().copied().collect(),
            log_evidence,
        })
    }
}

impl InverseProblem for StudyProblem {
    fn dim(&self) -> usize {
        match self {
            Self::Beam(p) => p.dim(),
            Self::Toy(p) => p.dim(),
        }
    }

    fn log_likelihood(&self, u: &DVector<f64>) -> f64 {
        match self {
            Self::Beam(p) => p.log_likelihood(u),
            Self::Toy(p) => p.log_likelihood(u),
        }
    }

    fn to_physical(&self, u: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Beam(p) => p.to_physical(u),
            Self::Toy(p) => p.to_physical(u),
        }
    }
}

impl GradientProblem for StudyProblem {
    fn log_likelihood_and_gradient(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        match self {
            Self::Beam(p) => p.log_likelihood_and_gradient(u),
            Self::Toy(p) => p.log_likelihood_and_gradient(u),
        }
    }
}

/// Generator of repeat `index` under a master seed: the master seed with the
/// repeat index as ChaCha stream number.
pub fn repeat_rng(master_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub repeat: usize,
    pub steps: Vec<StepRecord>,
    pub num_steps: usize,
    pub log_evidence: f64,
    pub eps_mu: f64,
    pub eps_var: f64,
    pub likelihood_calls: u64,
    pub gradient_calls: u64,
    pub final_ness: f64,
    pub n_final: usize,
    /// Rank selected in the first step (reduced runs only).
    pub first_rank: Option<usize>,
    /// Posterior sample mean and variance per coordinate.
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub repeats: usize,
    pub eps_mu_mean: f64,
    pub eps_mu_sd: f64,
    pub eps_mu_cv: f64,
    pub eps_var_mean: f64,
    pub eps_var_sd: f64,
    pub eps_var_cv: f64,
    pub mean_likelihood_calls: f64,
    pub mean_gradient_calls: f64,
    /// Number of runs by step count.
    pub step_histogram: BTreeMap<usize, usize>,
    pub mean_final_ness: f64,
    pub mean_log_evidence: f64,
    /// Mean of `ln Ẑ − ln Z`.
    pub mean_log_evidence_error: f64,
    /// Most frequent first-step rank (reduced runs only; ties go to the smaller rank).
    pub modal_first_rank: Option<usize>,
}

impl Aggregate {
    pub fn from_repeats(repeats: &[RepeatSummary], reference: &Reference) -> Self {
        let col = |f: &dyn Fn(&RepeatSummary) -> f64| repeats.iter().map(f).collect::<Vec<f64>>();
        let (eps_mu_mean, eps_mu_sd) = mean_and_sd(&col(&|r| r.eps_mu));
        let (eps_var_mean, eps_var_sd) = mean_and_sd(&col(&|r| r.eps_var));
        let mut step_histogram = BTreeMap::new();
        let mut ranks: BTreeMap<usize, usize> = BTreeMap::new();
        for r in repeats {
            *step_histogram.entry(r.num_steps).or_insert(0) += 1;
            if let Some(k) = r.first_rank {
                *ranks.entry(k).or_insert(0) += 1;
            }
        }
        let mut modal_first_rank = None;
        let mut best = 0;
        for (k, c) in ranks {
            if c > best {
                best = c;
                modal_first_rank = Some(k);
            }
        }
        let mean_log_evidence = mean_and_sd(&col(&|r| r.log_evidence)).0;
        let cv = |m: f64, s: f64| if m == 0.0 { 0.0 } else { s / m };
        Self {
            repeats: repeats.len(),
            eps_mu_mean,
            eps_mu_sd,
            eps_mu_cv: cv(eps_mu_mean, eps_mu_sd),
            eps_var_mean,
            eps_var_sd,
            eps_var_cv: cv(eps_var_mean, eps_var_sd),
            mean_likelihood_calls: mean_and_sd(&col(&|r| r.likelihood_calls as f64)).0,
            mean_gradient_calls: mean_and_sd(&col(&|r| r.gradient_calls as f64)).0,
            step_histogram,
            mean_final_ness: mean_and_sd(&col(&|r| r.final_ness)).0,
            mean_log_evidence,
            mean_log_evidence_error: mean_log_evidence - reference.log_evidence,
            modal_first_rank,
        }
    }

    /// Fraction of runs finishing in `lo..=hi` steps.
    pub fn step_fraction(&self, lo: usize, hi: usize) -> f64 {
        let hit: usize = self.step_histogram.range(lo..=hi).map(|(_, c)| c).sum();
        hit as f64 / self.repeats as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub reference: Reference,
    pub repeats: Vec<RepeatSummary>,
    pub aggregate: Aggregate,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// A repeat failed; `partial` holds every repeat that completed.
#[derive(Debug, thiserror::Error)]
#[error("repeat {repeat} failed: {source}")]
pub struct ExperimentFailure {
    pub repeat: usize,
    #[source]
    pub source: Error,
    pub partial: Option<Box<RunReport>>,
}

impl From<Error> for ExperimentFailure {
    fn from(source: Error) -> Self {
        Self {
            repeat: 0,
            source,
            partial: None,
        }
    }
}

fn summarize(
    repeat: usize,
    res: &PosteriorResult,
    counts: crate::problem::CallCounts,
    reference: &Reference,
) -> Result<RepeatSummary> {
    let (mean, var) = res.moments();
    let (eps_mu, eps_var) = relative_errors(&reference.mean, &reference.var, &mean, &var)?;
    Ok(RepeatSummary {
        repeat,
        num_steps: res.steps.len(),
        first_rank: res.steps.first().and_then(|s| s.rank),
        steps: res.steps.clone(),
        log_evidence: res.log_evidence,
        eps_mu,
        eps_var,
        likelihood_calls: counts.likelihood,
        gradient_calls: counts.gradient,
        final_ness: res.final_ness,
        n_final: res.n_final,
        mean,
        var,
    })
}

/// One sampler run on a call-counting wrapper.
pub fn run_once(
    config: &RunConfig,
    problem: &StudyProblem,
    repeat: usize,
) -> Result<(PosteriorResult, crate::problem::CallCounts)> {
    let counted = Counted::new(problem);
    let mut rng = repeat_rng(config.seed, repeat);
    let res = match config.method {
        Method::Cebu => run_cebu(&counted, &config.cebu_settings(), &mut rng)?,
        Method::Cebured => run_cebured(&counted, &config.cebured_settings(), &mut rng)?,
    };
    Ok((res, counted.counts()))
}

/// Runs `config.repeats` independent repeats in parallel and aggregates them.
pub fn run_experiment(config: &RunConfig) -> std::result::Result<RunReport, ExperimentFailure> {
    config.validate()?;
    let problem = config.build_problem()?;
    let reference = problem.reference()?;
    let outcomes: Vec<Result<RepeatSummary>> = (0..config.repeats)
        .into_par_iter()
        .map(|i| {
            let (res, counts) = run_once(config, &problem, i)?;
            summarize(i, &res, counts, &reference)
        })
        .collect();

    let mut done = Vec::with_capacity(outcomes.len());
    let mut failure = None;
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(s) => done.push(s),
            Err(e) if failure.is_none() => failure = Some((i, e)),
            Err(e) => log::warn!("repeat {i} also failed: {e}"),
        }
    }
    let aggregate = Aggregate::from_repeats(&done, &reference);
    let report = RunReport {
        config: config.clone(),
        reference,
        repeats: done,
        aggregate,
    };
    match failure {
        None => Ok(report),
        Some((repeat, source)) => Err(ExperimentFailure {
            repeat,
            source,
            partial: Some(Box::new(report)),
        }),
    }
}

/// Posterior sample moments of one repeat stacked as `(mean, var)` columns.
pub fn moments_matrix(summary: &RepeatSummary) -> DMatrix<f64> {
    let d = summary.mean.len();
    DMatrix::from_fn(d, 2, |i, j| {
        if j == 0 {
            summary.mean[i]
        } else {
            summary.var[i]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config() -> RunConfig {
        RunConfig {
            problem: ProblemKind::ToyActiveCoordinate,
            d: 8,
            repeats: 3,
            toy_noise_sd: 0.3,
            ..RunConfig::default()
        }
    }

    #[test]
    fn config_round_trips_through_text() {
        let mut cfg = toy_config();
        cfg.n_final = Some(77);
        cfg.beam.noise_sd = 2.5e-3;
        cfg.resampler = Resampler::Multinomial;
        let back = RunConfig::parse_str(&cfg.to_kv_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_parsing_errors_and_comments() {
        let cfg = RunConfig::parse_str("# study\nmethod = cebu  # baseline\n\nd=25\n").unwrap();
        assert_eq!(cfg.method, Method::Cebu);
        assert_eq!(cfg.d, 25);
        assert!(RunConfig::parse_str("d 25").is_err());
        assert!(RunConfig::parse_str("bogus = 1").is_err());
        assert!(RunConfig::parse_str("d = x").is_err());
        assert!(RunConfig {
            repeats: 0,
            ..RunConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn every_listed_key_is_accepted() {
        let text = RunConfig::default().to_kv_string();
        let written: Vec<&str> = text
            .lines()
            .map(|l| l.split(" = ").next().unwrap())
            .collect();
        for k in RunConfig::KEYS {
            assert!(k == "jobs" || written.contains(&k), "{k}");
        }
        let mut cfg = RunConfig::default();
        cfg.set("jobs", "4").unwrap();
    }

    #[test]
    fn single_repeat_aggregate_equals_the_run() {
        let cfg = RunConfig {
            repeats: 1,
            ..toy_config()
        };
        let report = run_experiment(&cfg).unwrap();
        let r = &report.repeats[0];
        let a = &report.aggregate;
        assert_eq!(a.repeats, 1);
        assert_eq!(a.eps_mu_mean, r.eps_mu);
        assert_eq!(a.eps_var_mean, r.eps_var);
        assert_eq!(a.mean_likelihood_calls, r.likelihood_calls as f64);
        assert_eq!(a.mean_log_evidence, r.log_evidence);
        assert_eq!(a.step_histogram.get(&r.num_steps), Some(&1));
    }

    #[test]
    fn reports_are_deterministic_and_round_trip() {
        for method in [Method::Cebu, Method::Cebured] {
            let cfg = RunConfig {
                method,
                n_per_level: 200,
                ..toy_config()
            };
            let a = run_experiment(&cfg).unwrap();
            let b = run_experiment(&cfg).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.repeats.len(), 3);
            let back = RunReport::from_json(&a.to_json().unwrap()).unwrap();
            assert_eq!(back, a);
        }
    }

    #[test]
    fn counters_match_step_records() {
        let cfg = toy_config();
        let report = run_experiment(&cfg).unwrap();
        for r in &report.repeats {
            let from_steps: usize =
                r.steps.iter().map(|s| s.likelihood_calls).sum::<usize>() + r.n_final;
            assert_eq!(r.likelihood_calls as usize, from_steps);
            assert_eq!(
                r.gradient_calls as usize,
                r.steps.iter().map(|s| s.gradient_calls).sum::<usize>()
            );
        }
        let cebu = RunConfig {
            method: Method::Cebu,
            n_per_level: 150,
            ..cfg
        };
        for r in &run_experiment(&cebu).unwrap().repeats {
            assert_eq!(r.likelihood_calls as usize, 150 * (r.num_steps + 1));
        }
    }

    #[test]
    fn failures_carry_the_partial_report() {
        let cfg = RunConfig {
            method: Method::Cebu,
            n_per_level: 200,
            max_steps: 1,
            toy_noise_sd: 0.001,
            ..toy_config()
        };
        let err = run_experiment(&cfg).unwrap_err();
        assert!(matches!(err.source, Error::MaxStepsExceeded { .. }));
        assert!(err.partial.is_some());
    }

    #[test]
    fn repeat_streams_differ_and_are_reproducible() {
        use rand::Rng;
        let a: u64 = repeat_rng(7, 0).random();
        let b: u64 = repeat_rng(7, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, repeat_rng(7, 0).random::<u64>());
    }
}
