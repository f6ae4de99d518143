//! Monte-Carlo estimates of an estimator's mean squared error.
//!
//! Each run draws a parameter from the prior, an observation from the
//! likelihood and an estimate from the mechanism, then records the squared
//! error. The reported value is the plain mean of the per-run errors, summed
//! in run order.

use rand::Rng;

use crate::bernoulli::{exact_posterior_means, sample_observation, BernoulliModelSpec};
use crate::error::{Error, Result};
use crate::lp::SolveOptions;
use crate::mechanisms::{lbapp_estimate, LbappEstimator};
use crate::model::{EstimatorKernel, FiniteModel, NeighborGraph};
use crate::rng::seeded;
use crate::ubapp::{sample_estimate, solve_ubapp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mse: f64,
    /// Standard error of `mse`; NaN for a single run.
    pub stderr: f64,
    pub runs: usize,
}

impl McEstimate {
    pub fn from_squared_errors(errors: &[f64]) -> Result<Self> {
        let n = errors.len();
        if n == 0 {
            return Err(Error::InvalidArgument("no Monte-Carlo runs".into()));
        }
        let mse = errors.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let ss: f64 = errors.iter().map(|e| (e - mse).powi(2)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Ok(McEstimate { mse, stderr, runs: n })
    }
}

fn check_runs(runs: usize) -> Result<()> {
    if runs == 0 {
        Err(Error::InvalidArgument(
            "number of Monte-Carlo runs must be at least 1".into(),
        ))
    } else {
        Ok(())
    }
}

/// Inverse-CDF draw of an index from non-negative weights summing to one.
fn draw_index<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last_positive = i;
            cumulative += w;
            if u < cumulative {
                return i;
            }
        }
    }
    last_positive
}

/// Squared errors of the Laplace estimator on `trials` coin flips, with
/// `θ` drawn from the continuous uniform prior.
pub fn lbapp_squared_errors<R: Rng + ?Sized>(
    trials: usize,
    estimator: &LbappEstimator,
    runs: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_runs(runs)?;
    (0..runs)
        .map(|_| {
            let theta: f64 = rng.random();
            let y = sample_observation(trials, theta, rng)?;
            let estimate = lbapp_estimate(estimator, y, rng)?;
            Ok((estimate - theta).powi(2))
        })
        .collect()
}

/// As [`mc_mse_lbapp`], drawing from a caller-supplied generator.
pub fn mc_mse_lbapp_with<R: Rng + ?Sized>(
    spec: &BernoulliModelSpec,
    epsilon: f64,
    runs: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    let trials = spec.trials();
    let estimator = LbappEstimator::new(
        exact_posterior_means(trials)?,
        &NeighborGraph::path(trials + 1),
        epsilon,
    )?;
    McEstimate::from_squared_errors(&lbapp_squared_errors(trials, &estimator, runs, rng)?)
}

/// Monte-Carlo MSE of the Laplace estimator on the Bernoulli model. The prior
/// is the continuous uniform and the center is the exact posterior mean, so
/// the grid size in `spec` plays no part.
pub fn mc_mse_lbapp(spec: &BernoulliModelSpec, epsilon: f64, runs: usize, seed: u64) -> Result<McEstimate> {
    mc_mse_lbapp_with(spec, epsilon, runs, &mut seeded(seed))
}

/// Squared errors of a kernel on a finite model: `θ` from the grid prior,
/// `y` from its likelihood column, the estimate from the kernel column.
pub fn kernel_squared_errors<R: Rng + ?Sized>(
    model: &FiniteModel,
    kernel: &EstimatorKernel,
    runs: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_runs(runs)?;
    if kernel.num_params() != model.num_params() || kernel.num_obs() != model.num_obs() {
        return Err(Error::DimensionMismatch(format!(
            "kernel is {}x{}, model needs {}x{}",
            kernel.num_params(),
            kernel.num_obs(),
            model.num_params(),
            model.num_obs()
        )));
    }
    let grid = model.grid();
    (0..runs)
        .map(|_| {
            let j = draw_index(model.prior().iter().copied(), rng);
            let y = draw_index(model.likelihood().column(j), rng);
            let estimate = sample_estimate(kernel, grid, y, rng)?;
            Ok((estimate - grid.point(j)).powi(2))
        })
        .collect()
}

pub fn mc_mse_kernel<R: Rng + ?Sized>(
    model: &FiniteModel,
    kernel: &EstimatorKernel,
    runs: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    McEstimate::from_squared_errors(&kernel_squared_errors(model, kernel, runs, rng)?)
}

/// Solves the optimal private kernel for the Bernoulli model and estimates
/// its MSE by sampling.
pub fn mc_mse_ubapp(
    spec: &BernoulliModelSpec,
    epsilon: f64,
    runs: usize,
    seed: u64,
    options: &SolveOptions,
) -> Result<McEstimate> {
    check_runs(runs)?;
    let model = crate::bernoulli::build_model(spec)?;
    let report = solve_ubapp(&model, epsilon, options)?;
    mc_mse_kernel(&model, &report.kernel, runs, &mut seeded(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernoulli::{build_model, exact_bayes_risk};
    use crate::ubapp::{analytic_mse, nonprivate_kernel};

    #[test]
    fn estimate_of_known_errors() {
        let e = McEstimate::from_squared_errors(&[1.0, 3.0]).unwrap();
        assert_eq!(e.mse, 2.0);
        assert!((e.stderr - 1.0).abs() < 1e-15);
        let one = McEstimate::from_squared_errors(&[0.25]).unwrap();
        assert_eq!(one.mse, 0.25);
        assert!(one.stderr.is_nan());
        assert!(McEstimate::from_squared_errors(&[]).is_err());
    }

    #[test]
    fn lbapp_with_negligible_noise() {
        let spec = BernoulliModelSpec::new(1, 3).unwrap();
        let est = mc_mse_lbapp(&spec, 1e3, 100_000, 3).unwrap();
        let oracle = exact_bayes_risk(1);
        assert!((est.mse - oracle).abs() <= 3.0 * est.stderr, "{est:?} vs {oracle}");
    }

    #[test]
    fn lbapp_risk_plus_noise() {
        let spec = BernoulliModelSpec::new(1, 3).unwrap();
        for eps in [0.5, 2.0] {
            let est = mc_mse_lbapp(&spec, eps, 200_000, 17).unwrap();
            let oracle = 1.0 / 18.0 + 2.0 / (9.0 * eps * eps);
            assert!(
                (est.mse - oracle).abs() <= 4.0 * est.stderr,
                "eps {eps}: {est:?} vs {oracle}"
            );
        }
    }

    #[test]
    fn lbapp_is_reproducible() {
        let spec = BernoulliModelSpec::new(4, 3).unwrap();
        let a = mc_mse_lbapp(&spec, 0.7, 500, 9).unwrap();
        let b = mc_mse_lbapp(&spec, 0.7, 500, 9).unwrap();
        assert_eq!(a.mse.to_bits(), b.mse.to_bits());
        assert!(mc_mse_lbapp(&spec, 0.7, 0, 9).is_err());
        assert!(mc_mse_lbapp(&spec, 0.0, 10, 9).is_err());
    }

    #[test]
    fn single_run_is_one_squared_error() {
        let spec = BernoulliModelSpec::new(2, 5).unwrap();
        let model = build_model(&spec).unwrap();
        let kernel = nonprivate_kernel(&model);
        let mut rng = seeded(4);
        let errors = kernel_squared_errors(&model, &kernel, 1, &mut rng).unwrap();
        let est = mc_mse_kernel(&model, &kernel, 1, &mut seeded(4)).unwrap();
        assert_eq!(est.mse, errors[0]);
    }

    #[test]
    fn deterministic_kernel_matches_analytic() {
        let model = build_model(&BernoulliModelSpec::new(3, 11).unwrap()).unwrap();
        let kernel = nonprivate_kernel(&model);
        let est = mc_mse_kernel(&model, &kernel, 50_000, &mut seeded(8)).unwrap();
        let exact = analytic_mse(&model, &kernel).unwrap();
        assert!((est.mse - exact).abs() <= 4.0 * est.stderr, "{est:?} vs {exact}");
    }

    #[test]
    fn ubapp_matches_analytic() {
        let spec = BernoulliModelSpec::new(3, 11).unwrap();
        let model = build_model(&spec).unwrap();
        let opts = SolveOptions::default();
        let exact = solve_ubapp(&model, 1.0, &opts).unwrap().mse;
        let est = mc_mse_ubapp(&spec, 1.0, 50_000, 21, &opts).unwrap();
        assert!((est.mse - exact).abs() <= 4.0 * est.stderr, "{est:?} vs {exact}");
    }
}
