//! Differentially private Bayes point estimation on finite models.
//!
//! Two private estimators are provided:
//!
//! * **UBaPP** ([`ubapp`]): the randomized estimator kernel that minimizes
//!   Bayes risk among all ε-DP kernels, found by linear programming ([`lp`]).
//! * **LBaPP** ([`mechanisms`]): the non-private posterior mean plus Laplace
//!   noise scaled to its ℓ₁-sensitivity.
//!
//! [`bernoulli`] builds the coin-flip model used in the experiments, and
//! [`eval`] runs Monte-Carlo evaluation and ε / K sweeps.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bernoulli;
pub mod error;
pub mod eval;
pub mod lp;
pub mod matrix;
pub mod mechanisms;
pub mod model;
pub mod rng;
pub mod tolerances;
pub mod ubapp;

pub use error::{Error, Result};
pub use lp::{LinearProgram, LpSolution, LpStatus, SolveOptions};
pub use matrix::Matrix;
pub use model::{
    make_uniform_grid, square_loss_matrix, validate_model, EstimatorKernel, FiniteModel, NeighborGraph,
    ObservationSpace, ParameterGrid, Violation,
};
pub use tolerances::Tolerances;
