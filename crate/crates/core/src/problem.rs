//! Inverse problems as seen by the samplers: a log-likelihood over
//! standard-normal space and the map back to physical parameters.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::linalg::row_vector;

/// A Bayesian inverse problem expressed in standard-normal space.
pub trait InverseProblem: Sync {
    /// Ambient dimension `d`.
    fn dim(&self) -> usize;

    /// `ln L̃(u)`.
    fn log_likelihood(&self, u: &DVector<f64>) -> f64;

    /// Inverse isoprobabilistic transform `u ↦ θ`.
    fn to_physical(&self, u: &DVector<f64>) -> DVector<f64>;
}

/// Problems that can also report `∇_u ln L̃(u)`.
pub trait GradientProblem: InverseProblem {
    /// Log-likelihood and its gradient from a single model solve.
    fn log_likelihood_and_gradient(&self, u: &DVector<f64>) -> (f64, DVector<f64>);
}

/// Evaluates the log-likelihood at every row of `samples` in parallel.
pub fn log_likelihoods<P: InverseProblem + ?Sized>(
    problem: &P,
    samples: &DMatrix<f64>,
) -> Vec<f64> {
    (0..samples.nrows())
        .into_par_iter()
        .map(|k| problem.log_likelihood(&row_vector(samples, k)))
        .collect()
}

/// Log-likelihoods and gradients (as rows of an `n × d` matrix) at every row of `samples`.
pub fn log_likelihoods_and_gradients<P: GradientProblem + ?Sized>(
    problem: &P,
    samples: &DMatrix<f64>,
) -> (Vec<f64>, DMatrix<f64>) {
    let evals: Vec<(f64, DVector<f64>)> = (0..samples.nrows())
        .into_par_iter()
        .map(|k| problem.log_likelihood_and_gradient(&row_vector(samples, k)))
        .collect();
    let mut grads = DMatrix::zeros(samples.nrows(), samples.ncols());
    let mut ll = Vec::with_capacity(evals.len());
    for (k, (l, g)) in evals.into_iter().enumerate() {
        ll.push(l);
        grads.set_row(k, &g.transpose());
    }
    (ll, grads)
}

/// Maps every row of `samples` through [`InverseProblem::to_physical`].
pub fn to_physical_rows<P: InverseProblem + ?Sized>(
    problem: &P,
    samples: &DMatrix<f64>,
) -> DMatrix<f64> {
    let rows: Vec<DVector<f64>> = (0..samples.nrows())
        .into_par_iter()
        .map(|k| problem.to_physical(&row_vector(samples, k)))
        .collect();
    let d = rows.first().map_or(0, |r| r.len());
    crate::linalg::rows_to_matrix(&rows, d)
}

/// Wraps a problem and counts likelihood and gradient evaluations.
///
/// A combined likelihood-and-gradient call counts once towards each counter.
#[derive(Debug)]
pub struct Counted<P> {
    inner: P,
    likelihood_calls: AtomicU64,
    gradient_calls: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CallCounts {
    pub likelihood: u64,
    pub gradient: u64,
}

impl<P> Counted<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            likelihood_calls: AtomicU64::new(0),
            gradient_calls: AtomicU64::new(0),
        }
    }

    pub fn counts(&self) -> CallCounts {
        CallCounts {
            likelihood: self.likelihood_calls.load(Ordering::Relaxed),
            gradient: self.gradient_calls.load(Ordering::Relaxed),
        }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn into_inner(self) -> P {
        self.inner
    }
}

impl<P: InverseProblem> InverseProblem for Counted<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_likelihood(&self, u: &DVector<f64>) -> f64 {
        self.likelihood_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.log_likelihood(u)
    }

    fn to_physical(&self, u: &DVector<f64>) -> DVector<f64> {
        self.inner.to_physical(u)
    }
}

impl<P: GradientProblem> GradientProblem for Counted<P> {
    fn log_likelihood_and_gradient(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        self.likelihood_calls.fetch_add(1, Ordering::Relaxed);
        self.gradient_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.log_likelihood_and_gradient(u)
    }
}

impl<P: InverseProblem + ?Sized> InverseProblem for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_likelihood(&self, u: &DVector<f64>) -> f64 {
        (**self).log_likelihood(u)
    }

    fn to_physical(&self, u: &DVector<f64>) -> DVector<f64> {
        (**self).to_physical(u)
    }
}

impl<P: GradientProblem + ?Sized> GradientProblem for &P {
    fn log_likelihood_and_gradient(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        (**self).log_likelihood_and_gradient(u)
    }
}
