//! The optimal ε-DP randomized estimator on a finite model.
//!
//! The kernel `P` (`|Θ| x |Y|`) minimizes the Bayes risk
//! `tr(Q diag(π) L P)` subject to `P[k][i] ≤ e^ε P[k][i']` for every
//! neighbor pair `(i, i')` and row `k`, column sums of one, and `P ≥ 0`.
//! The program is linear in `P`, so it is solved with the embedded simplex.
//!
//! LP variables are `vec(P)` in column-major order: `P[k][i]` is variable
//! `i · |Θ| + k`. Inequality rows come ordered by neighbor pair (lexicographic)
//! then by `k`; equality row `i` normalizes column `i`.

use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpStatus, Residuals, SolveOptions};
use crate::matrix::Matrix;
use crate::model::{EstimatorKernel, FiniteModel, ParameterGrid};
use crate::tolerances::Tolerances;

#[inline]
pub fn variable_index(num_params: usize, k: usize, i: usize) -> usize {
    i * num_params + k
}

/// Risk weight of reporting `θ_k` after `y_i`: `Σ_j Q[i][j] π_j L[j][k]`.
pub fn risk_weights(model: &FiniteModel) -> Matrix {
    let (n_theta, n_obs) = (model.num_params(), model.num_obs());
    let q = model.likelihood();
    let l = model.loss();
    let prior = model.prior();
    let mut w = Matrix::zeros(n_theta, n_obs);
    for i in 0..n_obs {
        for (j, &pj) in prior.iter().enumerate() {
            let qp = q.get(i, j) * pj;
            if qp == 0.0 {
                continue;
            }
            for (k, &loss) in l.row(j).iter().enumerate() {
                w.set(k, i, w.get(k, i) + qp * loss);
            }
        }
    }
    w
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )))
    }
}

pub fn build_program(model: &FiniteModel, epsilon: f64) -> Result<LinearProgram> {
    model.ensure_valid()?;
    check_epsilon(epsilon)?;
    let (n_theta, n_obs) = (model.num_params(), model.num_obs());
    let weights = risk_weights(model);
    let mut lp = LinearProgram::new(n_theta * n_obs);
    for i in 0..n_obs {
        for k in 0..n_theta {
            lp.set_objective(variable_index(n_theta, k, i), weights.get(k, i));
        }
    }
    let factor = epsilon.exp();
    for (i, j) in model.neighbors().pairs() {
        for k in 0..n_theta {
            lp.add_le(
                [
                    (variable_index(n_theta, k, i), 1.0),
                    (variable_index(n_theta, k, j), -factor),
                ],
                0.0,
            );
        }
    }
    for i in 0..n_obs {
        lp.add_eq((0..n_theta).map(|k| (variable_index(n_theta, k, i), 1.0)), 1.0);
    }
    Ok(lp)
}

/// `tr(Q diag(π) L P)`: expected loss of the randomized estimator.
pub fn analytic_mse(model: &FiniteModel, kernel: &EstimatorKernel) -> Result<f64> {
    if kernel.num_params() != model.num_params() || kernel.num_obs() != model.num_obs() {
        return Err(Error::DimensionMismatch(format!(
            "kernel is {}x{}, model needs {}x{}",
            kernel.num_params(),
            kernel.num_obs(),
            model.num_params(),
            model.num_obs()
        )));
    }
    let q = model.likelihood();
    let l = model.loss();
    let mut total = 0.0;
    for i in 0..model.num_obs() {
        for (j, &p) in model.prior().iter().enumerate() {
            let qp = q.get(i, j) * p;
            if qp == 0.0 {
                continue;
            }
            let expected_loss: f64 = l
                .row(j)
                .iter()
                .enumerate()
                .map(|(k, loss)| loss * kernel.prob(k, i))
                .sum();
            total += qp * expected_loss;
        }
    }
    Ok(total)
}

/// Turns raw LP output into a kernel: negative round-off is clamped, every
/// row is lifted to the smallest envelope satisfying the DP ratios exactly,
/// and columns are renormalized. Fails if either correction is larger than
/// round-off.
pub fn extract_kernel(model: &FiniteModel, epsilon: f64, raw: &[f64]) -> Result<EstimatorKernel> {
    let tol = Tolerances::DEFAULT;
    let (n_theta, n_obs) = (model.num_params(), model.num_obs());
    if raw.len() != n_theta * n_obs {
        return Err(Error::DimensionMismatch(format!(
            "{} LP values for a {n_theta}x{n_obs} kernel",
            raw.len()
        )));
    }
    let mut p = Matrix::zeros(n_theta, n_obs);
    for i in 0..n_obs {
        for k in 0..n_theta {
            let v = raw[variable_index(n_theta, k, i)];
            if !v.is_finite() || v < -tol.max_clamp {
                return Err(Error::KernelExtraction(format!(
                    "P[{k}][{i}] = {v:e} is below the clamp limit"
                )));
            }
            p.set(k, i, v.max(0.0));
        }
    }

    let shrink = (-epsilon).exp();
    let pairs: Vec<(usize, usize)> = model.neighbors().pairs().collect();
    let mut lifted = vec![0.0; n_obs];
    for k in 0..n_theta {
        for _ in 0..n_obs {
            let mut changed = false;
            for &(i, j) in &pairs {
                let floor = p.get(k, i) * shrink;
                if floor > p.get(k, j) {
                    lifted[j] += floor - p.get(k, j);
                    p.set(k, j, floor);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
    if let Some(i) = lifted.iter().position(|&m| m > tol.max_clamp) {
        return Err(Error::KernelExtraction(format!(
            "column {i} needed {:e} extra mass to satisfy the DP ratios",
            lifted[i]
        )));
    }

    for i in 0..n_obs {
        let s = p.column_sum(i);
        if !(s > 0.0) {
            return Err(Error::KernelExtraction(format!("column {i} has no mass")));
        }
        for k in 0..n_theta {
            p.set(k, i, p.get(k, i) / s);
        }
    }
    EstimatorKernel::new(p, epsilon)
}

#[derive(Debug, Clone)]
pub struct UbappSolveReport {
    pub kernel: EstimatorKernel,
    /// Bayes risk of `kernel` under the model's loss.
    pub mse: f64,
    pub solver_status: LpStatus,
    /// `max P[k][i] - e^ε P[k][i']` over neighbor pairs, after extraction.
    pub dp_residual: f64,
    pub iterations: usize,
    /// LP objective at the raw solver output.
    pub lp_objective: f64,
    /// Residuals of the raw solver output against the program.
    pub lp_residuals: Residuals,
}

/// Builds and solves the DP-constrained program and packages the kernel.
pub fn solve_ubapp(model: &FiniteModel, epsilon: f64, options: &SolveOptions) -> Result<UbappSolveReport> {
    let program = build_program(model, epsilon)?;
    solve_program(model, epsilon, &program, options)
}

/// As [`solve_ubapp`], reusing a program from [`build_program`].
pub fn solve_program(
    model: &FiniteModel,
    epsilon: f64,
    program: &LinearProgram,
    options: &SolveOptions,
) -> Result<UbappSolveReport> {
    let solution = lp::solve(program, options)?;
    match solution.status {
        LpStatus::Optimal => {}
        // Any kernel with identical columns is feasible and the objective is
        // non-negative, so these two mean the solver broke.
        LpStatus::Infeasible => return Err(Error::Infeasible),
        LpStatus::Unbounded => return Err(Error::Unbounded),
        LpStatus::IterationLimit => return Err(Error::IterationLimit(solution.iterations)),
    }
    let lp_residuals = lp::feasibility_residuals(program, &solution.variables)?;
    let kernel = extract_kernel(model, epsilon, &solution.variables)?;
    let mse = analytic_mse(model, &kernel)?;
    let dp_residual = kernel.dp_residual(model.neighbors());
    Ok(UbappSolveReport {
        mse,
        dp_residual,
        solver_status: solution.status,
        iterations: solution.iterations,
        lp_objective: solution.objective_value,
        lp_residuals,
        kernel,
    })
}

/// The ε = ∞ solution: each column a point mass on its risk-minimizing row
/// (ties to the lowest index).
pub fn nonprivate_kernel(model: &FiniteModel) -> EstimatorKernel {
    let w = risk_weights(model);
    let mut p = Matrix::zeros(model.num_params(), model.num_obs());
    for i in 0..model.num_obs() {
        let best = (0..model.num_params())
            .min_by(|&a, &b| w.get(a, i).total_cmp(&w.get(b, i)))
            .unwrap_or(0);
        p.set(best, i, 1.0);
    }
    EstimatorKernel::new(p, f64::INFINITY).expect("point masses form a valid kernel")
}

/// The best data-independent estimator: every column the same point mass.
pub fn best_constant_kernel(model: &FiniteModel, epsilon: f64) -> EstimatorKernel {
    let w = risk_weights(model);
    let best = (0..model.num_params())
        .min_by(|&a, &b| {
            let ra: f64 = w.row(a).iter().sum();
            let rb: f64 = w.row(b).iter().sum();
            ra.total_cmp(&rb)
        })
        .unwrap_or(0);
    let mut p = Matrix::zeros(model.num_params(), model.num_obs());
    for i in 0..model.num_obs() {
        p.set(best, i, 1.0);
    }
    EstimatorKernel::new(p, epsilon).expect("point masses form a valid kernel")
}

/// Index of a grid point drawn from column `obs` of the kernel.
pub fn sample_estimate_index<R: Rng + ?Sized>(kernel: &EstimatorKernel, obs: usize, rng: &mut R) -> Result<usize> {
    if obs >= kernel.num_obs() {
        return Err(Error::IndexOutOfRange {
            index: obs,
            size: kernel.num_obs(),
        });
    }
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for k in 0..kernel.num_params() {
        let p = kernel.prob(k, obs);
        if p > 0.0 {
            last_positive = k;
            cumulative += p;
            if u < cumulative {
                return Ok(k);
            }
        }
    }
    Ok(last_positive)
}

/// A parameter value drawn from column `obs` of the kernel.
pub fn sample_estimate<R: Rng + ?Sized>(
    kernel: &EstimatorKernel,
    grid: &ParameterGrid,
    obs: usize,
    rng: &mut R,
) -> Result<f64> {
    if grid.len() != kernel.num_params() {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} points, kernel has {} rows",
            grid.len(),
            kernel.num_params()
        )));
    }
    Ok(grid.point(sample_estimate_index(kernel, obs, rng)?))
}

/// CSV with a `theta` column followed by one column per observation label;
/// one row per grid point.
pub fn write_kernel_csv<W: Write>(model: &FiniteModel, kernel: &EstimatorKernel, mut out: W) -> std::io::Result<()> {
    write!(out, "theta")?;
    for label in model.observations().labels() {
        write!(out, ",{label}")?;
    }
    writeln!(out)?;
    for k in 0..kernel.num_params() {
        write!(out, "{:.16e}", model.grid().point(k))?;
        for i in 0..kernel.num_obs() {
            write!(out, ",{:.16e}", kernel.prob(k, i))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_kernel_csv_file(model: &FiniteModel, kernel: &EstimatorKernel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_kernel_csv(model, kernel, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}
