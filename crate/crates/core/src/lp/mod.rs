//! Standard-form linear programs and an embedded dense simplex solver.
//!
//! A [`LinearProgram`] minimizes `cᵀv` subject to `A v ≤ b`, `E v = f` and
//! per-variable lower bounds (0 unless set; `-∞` makes a variable free).
//! Constraint rows are stored as coefficient lists.

mod dump;
mod simplex;

use crate::error::{Error, Result};

pub use dump::{write_lp_file, write_lp_format};
pub use simplex::solve;

/// One constraint row: `Σ coeffs[(j, a)] · v_j  (≤ | =)  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Row { coeffs, rhs }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * v[j]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    ineq: Vec<Row>,
    eq: Vec<Row>,
    lower_bounds: Vec<f64>,
}

impl LinearProgram {
    /// A program over `num_vars` non-negative variables with a zero objective.
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; num_vars],
            ineq: Vec::new(),
            eq: Vec::new(),
            lower_bounds: vec![0.0; num_vars],
        }
    }

    pub fn with_objective(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            ..LinearProgram::new(n)
        }
    }

    pub fn set_objective(&mut self, j: usize, c: f64) {
        self.objective[j] = c;
    }

    /// Adds `Σ a_j v_j ≤ rhs`.
    pub fn add_le(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) -> &mut Self {
        self.ineq.push(Row::new(coeffs.into_iter().collect(), rhs));
        self
    }

    /// Adds `Σ a_j v_j ≥ rhs` as a negated `≤` row.
    pub fn add_ge(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) -> &mut Self {
        self.add_le(coeffs.into_iter().map(|(j, a)| (j, -a)), -rhs)
    }

    /// Adds `Σ a_j v_j = rhs`.
    pub fn add_eq(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) -> &mut Self {
        self.eq.push(Row::new(coeffs.into_iter().collect(), rhs));
        self
    }

    /// `f64::NEG_INFINITY` makes the variable free.
    pub fn set_lower_bound(&mut self, j: usize, lower: f64) {
        self.lower_bounds[j] = lower;
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn ineq_rows(&self) -> &[Row] {
        &self.ineq
    }

    pub fn eq_rows(&self) -> &[Row] {
        &self.eq
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower_bounds
    }

    pub fn num_rows(&self) -> usize {
        self.ineq.len() + self.eq.len()
    }

    pub fn objective_value(&self, v: &[f64]) -> f64 {
        self.objective.iter().zip(v).map(|(c, x)| c * x).sum()
    }

    /// Checks index ranges and finiteness of every coefficient.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower_bounds.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} lower bounds for {n} variables",
                self.lower_bounds.len()
            )));
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("objective[{j}] is not finite")));
        }
        if let Some(j) = self.lower_bounds.iter().position(|&l| l.is_nan() || l == f64::INFINITY) {
            return Err(Error::InvalidArgument(format!(
                "lower bound of variable {j} is invalid"
            )));
        }
        let rows = self.ineq.iter().map(|r| ("inequality", r));
        let rows = rows.chain(self.eq.iter().map(|r| ("equality", r)));
        for (idx, (kind, row)) in rows.enumerate() {
            if !row.rhs.is_finite() {
                return Err(Error::InvalidArgument(format!("{kind} row {idx} has a non-finite rhs")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(Error::DimensionMismatch(format!(
                        "{kind} row {idx} references variable {j} but there are {n}"
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "{kind} row {idx} has a non-finite coefficient"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl LpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::IterationLimit => "iteration_limit",
        }
    }
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// The final basic solution (the optimum when `status` is `Optimal`).
    pub variables: Vec<f64>,
    pub objective_value: f64,
    pub status: LpStatus,
    /// Total pivots across both phases.
    pub iterations: usize,
    pub phase_one_iterations: usize,
    /// Objective after every phase II pivot, when requested in [`SolveOptions`].
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Pivot budget; `None` means `50 · (rows + cols)`.
    pub max_iters: Option<usize>,
    /// Optimality, pivot and phase I feasibility tolerance.
    pub tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    pub record_trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: None,
            tol: 1e-9,
            bland_after: 200,
            record_trace: false,
        }
    }
}

impl SolveOptions {
    pub fn iteration_budget(&self, lp: &LinearProgram) -> usize {
        self.max_iters.unwrap_or(50 * (lp.num_rows() + lp.num_vars()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `max(0, max_r (A v - b)_r)`.
    pub max_ineq_violation: f64,
    /// `max_r |E v - f|_r`.
    pub max_eq_violation: f64,
    /// `min_j (v_j - lower_j)` over bounded variables; negative means a bound is broken.
    pub min_variable: f64,
}

impl Residuals {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_ineq_violation <= tol && self.max_eq_violation <= tol && self.min_variable >= -tol
    }
}

pub fn feasibility_residuals(lp: &LinearProgram, v: &[f64]) -> Result<Residuals> {
    if v.len() != lp.num_vars() {
        return Err(Error::DimensionMismatch(format!(
            "point has {} entries, program has {} variables",
            v.len(),
            lp.num_vars()
        )));
    }
    let max_ineq_violation = lp.ineq.iter().map(|r| r.eval(v) - r.rhs).fold(0.0, f64::max);
    let max_eq_violation = lp.eq.iter().map(|r| (r.eval(v) - r.rhs).abs()).fold(0.0, f64::max);
    let min_variable = v
        .iter()
        .zip(&lp.lower_bounds)
        .filter(|(_, l)| l.is_finite())
        .map(|(x, l)| x - l)
        .fold(f64::INFINITY, f64::min);
    Ok(Residuals {
        max_ineq_violation,
        max_eq_violation,
        min_variable,
    })
}
