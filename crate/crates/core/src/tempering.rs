//! Importance weights, normalized effective sample size and the adaptive
//! tempering schedule.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;

const BISECTION_ITERS: usize = 60;
const BISECTION_TOL: f64 = 1e-10;
const GRID_POINTS: usize = 200;

/// Target nESS `1 / (1 + δ²)` for a target coefficient of variation `δ` of the weights.
pub fn target_ness_from_cv(delta_w: f64) -> f64 {
    1.0 / (1.0 + delta_w * delta_w)
}

/// Normalized effective sample size `(Σw)² / (n Σw²)` of log-weights.
pub fn ness(log_w: &[f64]) -> Result<f64> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if log_w.is_empty() || max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::DegenerateWeights);
    }
    let (s1, s2) = log_w.iter().fold((0.0, 0.0), |(s1, s2), &lw| {
        let w = (lw - max).exp();
        (s1 + w, s2 + w * w)
    });
    Ok(s1 * s1 / (log_w.len() as f64 * s2))
}

/// Self-normalized weights summing to one.
pub fn normalized_weights(log_w: &[f64]) -> Result<Vec<f64>> {
    let lse = log_sum_exp(log_w);
    if !lse.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    Ok(log_w.iter().map(|lw| (lw - lse).exp()).collect())
}

/// State of one tempering level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TemperState {
    pub beta: f64,
    pub log_lik: Vec<f64>,
    pub log_w: Vec<f64>,
}

impl TemperState {
    /// Picks the next temperature after `beta_prev` for samples drawn from the
    /// previous level and forms the incremental weights `L^(β - β_prev)`.
    pub fn advance(log_lik: Vec<f64>, beta_prev: f64, target_ness: f64) -> Result<Self> {
        if log_lik.len() < 2 {
            return Err(Error::InvalidParameter(
                "tempering needs at least two samples".into(),
            ));
        }
        let beta = solve_beta(&log_lik, beta_prev, target_ness)?;
        let log_w = incremental_log_weights(&log_lik, beta - beta_prev);
        Ok(Self {
            beta,
            log_lik,
            log_w,
        })
    }

    pub fn ness(&self) -> Result<f64> {
        ness(&self.log_w)
    }
}

fn incremental_log_weights(log_lik: &[f64], delta_beta: f64) -> Vec<f64> {
    log_lik
        .iter()
        .map(|&l| {
            if l == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                delta_beta * l
            }
        })
        .collect()
}

fn ness_at(log_lik: &[f64], delta_beta: f64) -> f64 {
    ness(&incremental_log_weights(log_lik, delta_beta)).unwrap_or(0.0)
}

/// Next inverse temperature in `(beta_prev, 1]` whose incremental weights
/// `exp((β - beta_prev) ℓ)` reach `target_ness`.
///
/// Returns exactly 1 whenever the nESS at β = 1 already meets the target.
pub fn solve_beta(log_lik: &[f64], beta_prev: f64, target_ness: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta_prev) {
        return Err(Error::InvalidParameter(format!(
            "beta_prev must lie in [0, 1), got {beta_prev}"
        )));
    }
    if !(target_ness > 0.0 && target_ness < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target nESS must lie in (0, 1), got {target_ness}"
        )));
    }
    if log_lik.iter().all(|l| *l == f64::NEG_INFINITY) || log_lik.iter().any(|l| l.is_nan()) {
        return Err(Error::DegenerateWeights);
    }
    let span = 1.0 - beta_prev;
    let g = |beta: f64| ness_at(log_lik, beta - beta_prev) - target_ness;
    if g(1.0) >= 0.0 {
        return Ok(1.0);
    }

    let beta = bisect(&g, beta_prev, 1.0);
    let residual = g(beta);
    if residual.is_finite() && residual.abs() <= 1e-3 {
        return Ok(beta);
    }

    // Grid scan for the first sign change, then refine inside it.
    log::debug!("beta bisection ended off target (residual {residual:e}); scanning grid");
    let mut lo = beta_prev;
    for i in 1..=GRID_POINTS {
        let hi = beta_prev + span * i as f64 / GRID_POINTS as f64;
        if g(hi) < 0.0 {
            return Ok(bisect(&g, lo, hi));
        }
        lo = hi;
    }
    Ok(1.0)
}

/// Bisection for `g(lo) > 0 >= g(hi)`, returning a point strictly above `lo`.
fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..BISECTION_ITERS {
        if hi - lo < BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if mid > lo {
        mid
    } else {
        hi
    }
}

/// `ln((1/n) Σ exp(log_wₖ))`.
pub fn log_evidence_estimate(log_w_final: &[f64]) -> f64 {
    let lse = log_sum_exp(log_w_final);
    if lse == f64::NEG_INFINITY {
        log::warn!("all final weights vanish; evidence estimate is zero");
    }
    lse - (log_w_final.len() as f64).ln()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resampler {
    #[default]
    Stratified,
    Multinomial,
}

impl std::str::FromStr for Resampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stratified" => Ok(Self::Stratified),
            "multinomial" => Ok(Self::Multinomial),
            other => Err(Error::Config(format!("unknown resampler {other:?}"))),
        }
    }
}

impl std::fmt::Display for Resampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Stratified => "stratified",
            Self::Multinomial => "multinomial",
        })
    }
}

/// Indices of `count` draws with replacement from the weights `norm_w`.
pub fn resample_indices<R: Rng + ?Sized>(
    norm_w: &[f64],
    count: usize,
    scheme: Resampler,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if norm_w.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot resample from an empty set".into(),
        ));
    }
    if let Some(w) = norm_w.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "invalid resampling weight {w}"
        )));
    }
    let total: f64 = norm_w.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "resampling weights sum to {total}, not 1"
        )));
    }
    let mut cdf = Vec::with_capacity(norm_w.len());
    let mut acc = 0.0;
    for w in norm_w {
        acc += w;
        cdf.push(acc);
    }
    let last = cdf.len() - 1;
    let locate = |p: f64| cdf.partition_point(|c| *c <= p).min(last);

    let idx = match scheme {
        Resampler::Stratified => (0..count)
            .map(|i| locate((i as f64 + rng.random::<f64>()) / count as f64))
            .collect(),
        Resampler::Multinomial => (0..count).map(|_| locate(rng.random::<f64>())).collect(),
    };
    Ok(idx)
}

/// Resamples the rows of `samples` (`n × d`) `count` times.
pub fn resample<R: Rng + ?Sized>(
    samples: &DMatrix<f64>,
    norm_w: &[f64],
    count: usize,
    scheme: Resampler,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if samples.nrows() != norm_w.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples but {} weights",
            samples.nrows(),
            norm_w.len()
        )));
    }
    let idx = resample_indices(norm_w, count, scheme, rng)?;
    Ok(samples.select_rows(idx.iter()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ness_reference_values() {
        assert!((ness(&[0.3; 17]).unwrap() - 1.0).abs() < 1e-15);
        let one_hot = [0.0, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        assert!((ness(&one_hot).unwrap() - 0.25).abs() < 1e-15);
        // (2+1+1)^2 / (3 (4+1+1)) = 16/18
        let lw = [2f64.ln(), 0.0, 0.0];
        assert!((ness(&lw).unwrap() - 16.0 / 18.0).abs() < 1e-14);
        assert!(matches!(
            ness(&[f64::NEG_INFINITY; 3]),
            Err(Error::DegenerateWeights)
        ));
    }

    #[test]
    fn target_from_delta() {
        assert!((target_ness_from_cv(1.5) - 0.307_692_307_692_307_7).abs() < 1e-15);
    }

    #[test]
    fn solve_beta_constant_likelihood_jumps_to_one() {
        assert_eq!(solve_beta(&[-3.0; 10], 0.2, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn solve_beta_two_samples_clamps() {
        // two-sample nESS never drops below 1/2 > 0.3077
        assert_eq!(
            solve_beta(&[0.0, -1.0], 0.0, target_ness_from_cv(1.5)).unwrap(),
            1.0
        );
    }

    #[test]
    fn solve_beta_hits_target_when_interior() {
        let ll: Vec<f64> = (0..200).map(|i| -0.5 * (i as f64 * 0.37).powi(2)).collect();
        let target = target_ness_from_cv(1.5);
        let beta = solve_beta(&ll, 0.0, target).unwrap();
        assert!(beta > 0.0 && beta < 1.0);
        let achieved = ness_at(&ll, beta);
        assert!((achieved - target).abs() < 1e-3, "{achieved}");
    }

    #[test]
    fn solve_beta_rejects_bad_arguments() {
        assert!(solve_beta(&[0.0, 1.0], 1.0, 0.3).is_err());
        assert!(solve_beta(&[0.0, 1.0], 0.0, 1.0).is_err());
        assert!(solve_beta(&[f64::NEG_INFINITY; 2], 0.0, 0.3).is_err());
    }

    #[test]
    fn evidence_estimate_values() {
        assert!((log_evidence_estimate(&[1.7; 5]) - 1.7).abs() < 1e-14);
        assert!((log_evidence_estimate(&[2f64.ln(), 4f64.ln()]) - 3f64.ln()).abs() < 1e-14);
        assert_eq!(log_evidence_estimate(&[-4.2]), -4.2);
        assert_eq!(
            log_evidence_estimate(&[f64::NEG_INFINITY; 2]),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn one_hot_resampling_is_deterministic() {
        let samples = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for scheme in [Resampler::Stratified, Resampler::Multinomial] {
            let out = resample(&samples, &[0.0, 1.0, 0.0], 7, scheme, &mut rng).unwrap();
            for k in 0..7 {
                assert_eq!(out.row(k), samples.row(1));
            }
        }
    }

    #[test]
    fn stratified_uniform_selects_each_once_within_one() {
        let n = 50;
        let w = vec![1.0 / n as f64; n];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let idx = resample_indices(&w, n, Resampler::Stratified, &mut rng).unwrap();
        let mut counts = vec![0usize; n];
        for i in idx {
            counts[i] += 1;
        }
        assert!(counts.iter().all(|c| *c <= 2));
    }

    #[test]
    fn resampling_rejects_negative_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(resample_indices(&[1.5, -0.5], 3, Resampler::Stratified, &mut rng).is_err());
        assert!(resample_indices(&[0.5, 0.4], 3, Resampler::Stratified, &mut rng).is_err());
    }

    #[test]
    fn resampled_mean_tracks_weighted_mean() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let raw: Vec<f64> = (0..20).map(|i| 1.0 + (i % 3) as f64).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let weighted_mean: f64 = xs.iter().zip(&w).map(|(x, w)| x * w).sum();
        let var: f64 = xs
            .iter()
            .zip(&w)
            .map(|(x, w)| w * (x - weighted_mean).powi(2))
            .sum();
        let samples = DMatrix::from_column_slice(20, 1, &xs);
        let count = 100;
        for scheme in [Resampler::Stratified, Resampler::Multinomial] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let reps = 200;
            let mut means = Vec::with_capacity(reps);
            for _ in 0..reps {
                let out = resample(&samples, &w, count, scheme, &mut rng).unwrap();
                means.push(out.mean());
            }
            let grand = means.iter().sum::<f64>() / reps as f64;
            // multinomial standard error bounds the stratified one
            let se = (var / count as f64 / reps as f64).sqrt();
            assert!(
                (grand - weighted_mean).abs() < 3.0 * se,
                "{scheme:?}: {grand} vs {weighted_mean}"
            );
        }
    }

    proptest! {
        #[test]
        fn ness_is_shift_invariant(
            lw in prop::collection::vec(-30.0..30.0f64, 2..40),
            shift in -500.0..500.0f64,
        ) {
            let shifted: Vec<f64> = lw.iter().map(|x| x + shift).collect();
            prop_assert!((ness(&lw).unwrap() - ness(&shifted).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn solve_beta_is_bracketed_and_on_target(
            ll in prop::collection::vec(-200.0..0.0f64, 10..80),
            beta_prev in 0.0..0.9f64,
        ) {
            let target = target_ness_from_cv(1.5);
            let beta = solve_beta(&ll, beta_prev, target).unwrap();
            prop_assert!(beta > beta_prev && beta <= 1.0);
            if beta < 1.0 {
                prop_assert!((ness_at(&ll, beta - beta_prev) - target).abs() < 1e-3);
            }
        }
    }
}
