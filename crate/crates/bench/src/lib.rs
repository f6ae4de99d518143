//! Shared fixtures for the benchmarks.

use dpbayes_core::bernoulli::{build_model, BernoulliModelSpec};
use dpbayes_core::FiniteModel;

pub fn bernoulli(trials: usize, grid: usize) -> FiniteModel {
    build_model(&BernoulliModelSpec::new(trials, grid).expect("valid spec")).expect("model builds")
}
