//! Bernoulli trials observed through their sum: `K` coin flips with unknown
//! bias `θ ∈ [0, 1]`, uniform prior, square loss. The observation `y` is the
//! number of ones, so `Y = {0, …, K}`, the likelihood is binomial and flipping
//! one trial moves `y` by exactly one.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{make_uniform_grid, square_loss_matrix, FiniteModel, NeighborGraph, ObservationSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BernoulliModelSpec {
    trials: usize,
    grid_size: usize,
}

impl BernoulliModelSpec {
    pub fn new(trials: usize, grid_size: usize) -> Result<Self> {
        if trials < 1 {
            return Err(Error::InvalidArgument("number of trials must be at least 1".into()));
        }
        if grid_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid size must be at least 2, got {grid_size}"
            )));
        }
        Ok(BernoulliModelSpec { trials, grid_size })
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn num_obs(&self) -> usize {
        self.trials + 1
    }
}

fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64).ln() - (i as f64).ln()).sum()
}

/// `C(K, y) θ^y (1-θ)^(K-y)` with `0⁰ = 1`.
pub fn binomial_pmf(trials: usize, y: usize, theta: f64) -> f64 {
    if y > trials {
        return 0.0;
    }
    if theta <= 0.0 {
        return if y == 0 { 1.0 } else { 0.0 };
    }
    if theta >= 1.0 {
        return if y == trials { 1.0 } else { 0.0 };
    }
    let log = ln_choose(trials, y) + y as f64 * theta.ln() + (trials - y) as f64 * (-theta).ln_1p();
    log.exp()
}

/// Uniform grid on `[0, 1]`, binomial likelihood, uniform prior, square loss,
/// and the path graph on `{0, …, K}` as the neighbor relation.
pub fn build_model(spec: &BernoulliModelSpec) -> Result<FiniteModel> {
    let grid = make_uniform_grid(0.0, 1.0, spec.grid_size)?;
    let k = spec.trials;
    let likelihood = Matrix::from_fn(k + 1, grid.len(), |y, j| binomial_pmf(k, y, grid.point(j)));
    let loss = square_loss_matrix(&grid);
    let prior = vec![1.0 / spec.grid_size as f64; spec.grid_size];
    let neighbors = NeighborGraph::path(k + 1);
    debug_assert!(neighbors.pairs().all(|(i, j)| i.abs_diff(j) == 1));
    FiniteModel::new(
        grid,
        ObservationSpace::indexed(k + 1)?,
        neighbors,
        likelihood,
        loss,
        prior,
    )
}

/// Posterior mean under the continuous uniform prior: `(y + 1) / (K + 2)`.
pub fn exact_posterior_mean(trials: usize, y: usize) -> Result<f64> {
    if trials < 1 {
        return Err(Error::InvalidArgument("number of trials must be at least 1".into()));
    }
    if y > trials {
        return Err(Error::IndexOutOfRange {
            index: y,
            size: trials + 1,
        });
    }
    Ok((y as f64 + 1.0) / (trials as f64 + 2.0))
}

/// Posterior means for every `y ∈ {0, …, K}`.
pub fn exact_posterior_means(trials: usize) -> Result<Vec<f64>> {
    (0..=trials).map(|y| exact_posterior_mean(trials, y)).collect()
}

/// `1 / (K + 2)`: how far the posterior mean moves when one trial flips.
pub fn exact_sensitivity(trials: usize) -> f64 {
    1.0 / (trials as f64 + 2.0)
}

/// Bayes risk of the posterior mean under the continuous uniform prior: the
/// Beta(y+1, K-y+1) posterior variance averaged over the uniform marginal of
/// `y`.
pub fn exact_bayes_risk(trials: usize) -> f64 {
    let k = trials as f64;
    let denom = (k + 2.0) * (k + 2.0) * (k + 3.0);
    let total: f64 = (0..=trials)
        .map(|y| {
            let y = y as f64;
            (y + 1.0) * (k + 1.0 - y) / denom
        })
        .sum();
    total / (k + 1.0)
}

/// Number of ones in `K` independent Bernoulli(θ) draws.
pub fn sample_observation<R: Rng + ?Sized>(trials: usize, theta: f64, rng: &mut R) -> Result<usize> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!(
            "Bernoulli parameter must lie in [0, 1], got {theta}"
        )));
    }
    Ok((0..trials).filter(|_| rng.random::<f64>() < theta).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;
    use crate::rng::seeded;

    #[test]
    fn single_trial_three_point_grid() {
        let m = build_model(&BernoulliModelSpec::new(1, 3).unwrap()).unwrap();
        assert_eq!(m.likelihood().to_rows(), vec![vec![1.0, 0.5, 0.0], vec![0.0, 0.5, 1.0]]);
        assert_eq!(m.prior(), &[1.0 / 3.0; 3]);
        assert_eq!(m.neighbors().num_ordered_pairs(), 2);
    }

    #[test]
    fn two_trials_at_half() {
        let m = build_model(&BernoulliModelSpec::new(2, 3).unwrap()).unwrap();
        let col: Vec<f64> = m.likelihood().column(1).collect();
        assert_eq!(col, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn endpoint_columns_are_point_masses() {
        let m = build_model(&BernoulliModelSpec::new(7, 11).unwrap()).unwrap();
        let first: Vec<f64> = m.likelihood().column(0).collect();
        let last: Vec<f64> = m.likelihood().column(10).collect();
        assert_eq!(first[0], 1.0);
        assert_eq!(last[7], 1.0);
        for c in 0..11 {
            assert!((m.likelihood().column_sum(c) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn models_validate_across_sizes() {
        for k in 1..=30 {
            for &g in &[3, 21, 201] {
                let m = build_model(&BernoulliModelSpec::new(k, g).unwrap()).unwrap();
                assert!(validate_model(&m).is_empty(), "K={k} M={g}");
                assert!(m.neighbors().pairs().all(|(i, j)| i.abs_diff(j) == 1));
                assert_eq!(m.neighbors().num_ordered_pairs(), 2 * k);
            }
        }
    }

    #[test]
    fn binomial_large_trials_is_normalized() {
        let s: f64 = (0..=300).map(|y| binomial_pmf(300, y, 0.37)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_forms() {
        assert_eq!(exact_posterior_mean(8, 4).unwrap(), 0.5);
        assert_eq!(exact_posterior_mean(1, 0).unwrap(), 1.0 / 3.0);
        assert!(exact_posterior_mean(0, 0).is_err());
        assert!(exact_posterior_mean(3, 4).is_err());
        assert_eq!(exact_sensitivity(8), 0.1);
        assert_eq!(exact_sensitivity(1), 1.0 / 3.0);
        assert!((exact_bayes_risk(1) - 1.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn sensitivity_and_risk_shrink_with_trials() {
        for k in 1..200 {
            assert!(exact_sensitivity(k + 1) < exact_sensitivity(k));
            assert!(exact_bayes_risk(k + 1) < exact_bayes_risk(k));
        }
        assert!(exact_bayes_risk(10_000) < 1e-4);
    }

    #[test]
    fn posterior_mean_is_monotone_and_symmetric() {
        for k in 1..=30 {
            for y in 0..=k {
                let a = exact_posterior_mean(k, y).unwrap();
                let b = exact_posterior_mean(k, k - y).unwrap();
                assert!((a + b - 1.0).abs() < 1e-15);
                if y > 0 {
                    assert!(a > exact_posterior_mean(k, y - 1).unwrap());
                }
            }
        }
    }

    #[test]
    fn observation_sampling() {
        let mut rng = seeded(1);
        assert!((0..100).all(|_| sample_observation(5, 0.0, &mut rng).unwrap() == 0));
        assert!((0..100).all(|_| sample_observation(5, 1.0, &mut rng).unwrap() == 5));
        assert!(sample_observation(5, 1.5, &mut rng).is_err());
        let n = 100_000;
        let total: usize = (0..n).map(|_| sample_observation(10, 0.5, &mut rng).unwrap()).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 5.0).abs() < 0.05, "{mean}");
    }
}
