//! Relative error measures and sample moments.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `(‖μ_ref − μ̂‖₂ / ‖μ_ref‖₂, ‖σ²_ref − σ̂²‖₂ / ‖σ²_ref‖₂)`.
pub fn relative_errors(
    ref_mean: &[f64],
    ref_var: &[f64],
    est_mean: &[f64],
    est_var: &[f64],
) -> Result<(f64, f64)> {
    Ok((
        relative_error(ref_mean, est_mean)?,
        relative_error(ref_var, est_var)?,
    ))
}

/// `‖reference − estimate‖₂ / ‖reference‖₂`.
pub fn relative_error(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} reference vs {} estimated entries",
            reference.len(),
            estimate.len()
        )));
    }
    let norm = reference.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    let diff = reference
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm)
}

/// Column means and (1/N) variances of the rows of `samples`.
pub fn sample_moments(samples: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = samples.nrows() as f64;
    samples
        .column_iter()
        .map(|c| {
            let m = c.sum() / n;
            (m, c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
        })
        .unzip()
}

/// Mean and sample standard deviation (`n − 1` denominator; zero for one value).
pub fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    (
        m,
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt(),
    )
}
