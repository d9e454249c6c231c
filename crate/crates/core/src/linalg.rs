//! Small dense linear-algebra helpers shared by the samplers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Number of jitter escalations attempted after a failed factorization.
pub const JITTER_RETRIES: usize = 3;

/// Lower Cholesky factor of a symmetric matrix.
///
/// On failure the diagonal is inflated by `1e-12 * scale`, then by ten times
/// that, up to [`JITTER_RETRIES`] times. Returns the factor together with the
/// jitter that was finally added (zero when none was needed).
pub fn cholesky_with_jitter(
    m: &DMatrix<f64>,
    scale: f64,
    context: &'static str,
) -> Result<(DMatrix<f64>, f64)> {
    if let Some(c) = m.clone().cholesky() {
        return Ok((c.l(), 0.0));
    }
    let mut jitter = 1e-12 * scale.abs().max(f64::MIN_POSITIVE);
    for _ in 0..JITTER_RETRIES {
        let mut shifted = m.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += jitter;
        }
        if let Some(c) = shifted.cholesky() {
            return Ok((c.l(), jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::NotPositiveDefinite { context })
}

/// Replaces `m` by `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `ln Σ exp(xᵢ)`, returning `-inf` when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    l.solve_lower_triangular(b)
        .expect("triangular factor has a zero pivot")
}

/// `ln det` of the matrix whose lower Cholesky factor is `l`.
pub fn log_det_from_cholesky(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>()
}

/// Copies row `k` of `m` into a column vector.
pub fn row_vector(m: &DMatrix<f64>, k: usize) -> DVector<f64> {
    m.row(k).transpose()
}

/// Builds an `n × d` matrix from row vectors of length `d`.
pub fn rows_to_matrix(rows: &[DVector<f64>], d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), d);
    for (k, row) in rows.iter().enumerate() {
        m.set_row(k, &row.transpose());
    }
    m
}

/// Stacks two matrices with equal column counts vertically.
pub fn vstack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(top.ncols(), bottom.ncols(), "vstack column mismatch");
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}
