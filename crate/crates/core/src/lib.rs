//! Cross-entropy importance sampling for Bayesian inverse problems, in the
//! full standard-normal space and in gradient-informed subspaces, with a
//! linear-Gaussian cantilever-beam benchmark that has a closed-form posterior.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beam;
pub mod ce_fit;
pub mod cebu;
pub mod cebured;
pub mod error;
pub mod experiment;
pub mod field_prior;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod subspace;
pub mod tempering;
pub mod toy;

pub use beam::{BeamConfig, BeamData, BeamProblem};
pub use ce_fit::{weighted_fit, GaussianParams, LogDensity};
pub use cebu::{run_cebu, CebuSettings, PosteriorResult, StepRecord};
pub use cebured::{run_cebured, CebuRedSettings};
pub use error::{Error, Result};
pub use experiment::{run_experiment, Method, ProblemKind, RunConfig, RunReport};
pub use field_prior::{ExponentialKernel, GaussianFieldPrior, GridSpec};
pub use problem::{CallCounts, Counted, GradientProblem, InverseProblem};
pub use subspace::{Spectrum, SubspaceBasis};
pub use tempering::{Resampler, TemperState};
pub use toy::LinearGaussianToy;
