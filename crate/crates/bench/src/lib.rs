//! Shared fixtures for the benchmarks.

use cebu_core::beam::{BeamConfig, BeamProblem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn beam(d: usize) -> BeamProblem {
    BeamProblem::new(BeamConfig::with_dim(d)).expect("default beam builds")
}

pub fn standard_normal_rows(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

pub fn standard_normal_vector(d: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}
