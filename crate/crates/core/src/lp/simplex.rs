//! Two-phase revised simplex with an explicit dense basis inverse.
//!
//! The program is brought to the form `A x = b, x ≥ 0, b ≥ 0` by shifting
//! bounded variables, splitting free ones, scaling every row to unit max-norm
//! and adding one slack per inequality. Rows that cannot start on their slack
//! get an artificial column, so the initial basis is always the identity.
//!
//! Pricing is Dantzig's rule until a run of `bland_after` consecutive
//! degenerate pivots, after which Bland's smallest-index rule takes over until
//! the objective moves again. The leaving row comes from a two-pass ratio
//! test that prefers large pivots, which keeps the explicit inverse usable on
//! programs whose bases mix entries of very different magnitude. The inverse
//! is rebuilt from scratch whenever it stops reproducing the right-hand side.

use nalgebra::DMatrix;

use super::{LinearProgram, LpSolution, LpStatus, SolveOptions};
use crate::error::Result;

const NONBASIC: usize = usize::MAX;
/// Pivots between recomputations of the basic solution and the duals.
const REFRESH_EVERY: usize = 100;
/// A step shorter than this counts as degenerate.
const DEGENERATE_STEP: f64 = 1e-12;
/// Pivots smaller than this fraction of the largest candidate are skipped.
const PIVOT_RELATIVE: f64 = 1e-11;
const PIVOT_ABSOLUTE: f64 = 1e-11;
/// Under Bland's rule, ties whose pivot is below this fraction of the best
/// tied pivot are not eligible.
const BLAND_PIVOT_FLOOR: f64 = 1e-3;
/// Infeasibility a basic variable may pick up in the Harris ratio test.
const HARRIS_SLACK: f64 = 1e-12;
/// Residual of `B x_B = b` above which the basis inverse is rebuilt.
const REINVERT_RESIDUAL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct StandardForm {
    rows: usize,
    cols: Vec<Vec<(usize, f64)>>,
    kind: Vec<ColKind>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    initial_basis: Vec<usize>,
    /// Per original variable: its column, the negative-part column if free,
    /// and the shift applied to bounded variables.
    var_map: Vec<(usize, Option<usize>, f64)>,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> StandardForm {
        let n = lp.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut kind = Vec::new();
        let mut cost = Vec::new();
        let mut var_map = Vec::with_capacity(n);
        for j in 0..n {
            let c = lp.objective()[j];
            let lower = lp.lower_bounds()[j];
            let plus = cols.len();
            cols.push(Vec::new());
            kind.push(ColKind::Structural);
            cost.push(c);
            if lower.is_finite() {
                var_map.push((plus, None, lower));
            } else {
                cols.push(Vec::new());
                kind.push(ColKind::Structural);
                cost.push(-c);
                var_map.push((plus, Some(plus + 1), 0.0));
            }
        }

        let n_ineq = lp.ineq_rows().len();
        let all_rows = lp.ineq_rows().iter().chain(lp.eq_rows());
        let rows = n_ineq + lp.eq_rows().len();
        let mut rhs = Vec::with_capacity(rows);
        let mut initial_basis = Vec::with_capacity(rows);
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (r, row) in all_rows.enumerate() {
            merged.clear();
            merged.extend(row.coeffs.iter().copied());
            merged.sort_by_key(|&(j, _)| j);
            merged.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
            let shifted_rhs = row.rhs - merged.iter().map(|&(j, a)| a * var_map[j].2).sum::<f64>();
            let max_abs = merged.iter().fold(0.0_f64, |m, &(_, a)| m.max(a.abs()));
            let scale = if max_abs > 0.0 { 1.0 / max_abs } else { 1.0 };
            let sign = if shifted_rhs * scale < 0.0 { -1.0 } else { 1.0 };
            let factor = sign * scale;
            for &(j, a) in &merged {
                if a == 0.0 {
                    continue;
                }
                let (plus, minus, _) = var_map[j];
                cols[plus].push((r, factor * a));
                if let Some(minus) = minus {
                    cols[minus].push((r, -factor * a));
                }
            }
            rhs.push(factor * shifted_rhs);

            let is_ineq = r < n_ineq;
            if is_ineq {
                cols.push(vec![(r, sign)]);
                kind.push(ColKind::Slack);
                cost.push(0.0);
            }
            if is_ineq && sign > 0.0 {
                initial_basis.push(cols.len() - 1);
            } else {
                cols.push(vec![(r, 1.0)]);
                kind.push(ColKind::Artificial);
                cost.push(0.0);
                initial_basis.push(cols.len() - 1);
            }
        }
        StandardForm {
            rows,
            cols,
            kind,
            cost,
            rhs,
            initial_basis,
            var_map,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PhaseOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Simplex<'a> {
    sf: &'a StandardForm,
    m: usize,
    /// Column-major `B⁻¹`: entry `(r, c)` lives at `binv[c * m + r]`.
    binv: Vec<f64>,
    basis: Vec<usize>,
    position: Vec<usize>,
    xb: Vec<f64>,
    duals: Vec<f64>,
    cost: Vec<f64>,
    may_enter: Vec<bool>,
    alpha: Vec<f64>,
    touched: Vec<usize>,
    iterations: usize,
    budget: usize,
    tol: f64,
    bland_after: usize,
}

impl<'a> Simplex<'a> {
    fn new(sf: &'a StandardForm, budget: usize, tol: f64, bland_after: usize) -> Self {
        let m = sf.rows;
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = 1.0;
        }
        let mut position = vec![NONBASIC; sf.cols.len()];
        for (r, &c) in sf.initial_basis.iter().enumerate() {
            position[c] = r;
        }
        Simplex {
            sf,
            m,
            binv,
            basis: sf.initial_basis.clone(),
            position,
            xb: sf.rhs.clone(),
            duals: vec![0.0; m],
            cost: vec![0.0; sf.cols.len()],
            may_enter: vec![true; sf.cols.len()],
            alpha: vec![0.0; m],
            touched: Vec::with_capacity(m),
            iterations: 0,
            budget,
            tol,
            bland_after,
        }
    }

    fn binv_col(&self, c: usize) -> &[f64] {
        &self.binv[c * self.m..(c + 1) * self.m]
    }

    /// `x_B = B⁻¹ b` from scratch.
    fn recompute_primal(&mut self) {
        self.xb.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..self.m {
            let b = self.sf.rhs[i];
            if b != 0.0 {
                let col = &self.binv[i * self.m..(i + 1) * self.m];
                for (x, v) in self.xb.iter_mut().zip(col) {
                    *x += b * v;
                }
            }
        }
    }

    /// `yᵀ = c_Bᵀ B⁻¹` from scratch.
    fn recompute_duals(&mut self) {
        let cb: Vec<(usize, f64)> = self
            .basis
            .iter()
            .enumerate()
            .map(|(r, &c)| (r, self.cost[c]))
            .filter(|&(_, c)| c != 0.0)
            .collect();
        for c in 0..self.m {
            let col = self.binv_col(c);
            self.duals[c] = cb.iter().map(|&(r, w)| w * col[r]).sum();
        }
    }

    /// Recomputes `x_B` and the duals, first rebuilding `B⁻¹` if it no
    /// longer reproduces `b`.
    fn refresh(&mut self) {
        self.recompute_primal();
        if self.primal_residual() > REINVERT_RESIDUAL && self.reinvert() {
            self.recompute_primal();
        }
        self.recompute_duals();
    }

    /// `max |b - B x_B|` over the scaled rows.
    fn primal_residual(&self) -> f64 {
        let mut residual = self.sf.rhs.clone();
        for (r, &c) in self.basis.iter().enumerate() {
            for &(i, a) in &self.sf.cols[c] {
                residual[i] -= a * self.xb[r];
            }
        }
        residual.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Rebuilds `B⁻¹` from the basis columns, discarding the error that
    /// rank-one updates accumulate. Single-entry columns (slacks, artificials
    /// and some structurals) are eliminated directly, leaving a dense LU on
    /// the block of remaining columns against their uncovered rows. Returns
    /// false, leaving the inverse alone, if that block is numerically singular.
    fn reinvert(&mut self) -> bool {
        let m = self.m;
        let mut row_owner = vec![NONBASIC; m];
        let mut rest = Vec::new();
        for (r, &c) in self.basis.iter().enumerate() {
            match self.sf.cols[c][..] {
                [(i, _)] if row_owner[i] == NONBASIC => row_owner[i] = r,
                _ => rest.push(r),
            }
        }
        let free_rows: Vec<usize> = (0..m).filter(|&i| row_owner[i] == NONBASIC).collect();
        if free_rows.len() != rest.len() {
            return false;
        }
        let mut local = vec![NONBASIC; m];
        for (l, &i) in free_rows.iter().enumerate() {
            local[i] = l;
        }
        let s = rest.len();
        let mut block = DMatrix::<f64>::zeros(s, s);
        for (l, &r) in rest.iter().enumerate() {
            for &(i, a) in &self.sf.cols[self.basis[r]] {
                if local[i] != NONBASIC {
                    block[(local[i], l)] = a;
                }
            }
        }
        let Some(block_inv) = block.lu().try_inverse() else {
            return false;
        };
        if block_inv.iter().any(|v| !v.is_finite()) {
            return false;
        }

        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for (l, &r) in rest.iter().enumerate() {
            for (lj, &j) in free_rows.iter().enumerate() {
                self.binv[j * m + r] = block_inv[(l, lj)];
            }
        }
        // A singleton basic u in row i satisfies d x_u + Σ_l C[i][l] x_l = b_i,
        // so its row of B⁻¹ is (e_i - C[i] · block⁻¹ on the free rows) / d.
        let mut coupled_index = vec![NONBASIC; m];
        let mut coupled_rows = Vec::new();
        for &r in &rest {
            for &(i, _) in &self.sf.cols[self.basis[r]] {
                if row_owner[i] != NONBASIC && coupled_index[i] == NONBASIC {
                    coupled_index[i] = coupled_rows.len();
                    coupled_rows.push(i);
                }
            }
        }
        let mut coupling = DMatrix::<f64>::zeros(coupled_rows.len(), s);
        for (l, &r) in rest.iter().enumerate() {
            for &(i, a) in &self.sf.cols[self.basis[r]] {
                if coupled_index[i] != NONBASIC {
                    coupling[(coupled_index[i], l)] = a;
                }
            }
        }
        let product = coupling * &block_inv;
        for i in 0..m {
            let u = row_owner[i];
            if u == NONBASIC {
                continue;
            }
            let d = self.sf.cols[self.basis[u]][0].1;
            self.binv[i * m + u] = 1.0 / d;
            if coupled_index[i] != NONBASIC {
                let c = coupled_index[i];
                for (lj, &j) in free_rows.iter().enumerate() {
                    self.binv[j * m + u] = -product[(c, lj)] / d;
                }
            }
        }
        true
    }

    /// One step of iterative refinement on `B x_B = b`.
    fn refine_primal(&mut self) {
        let mut residual = self.sf.rhs.clone();
        for (r, &c) in self.basis.iter().enumerate() {
            for &(i, a) in &self.sf.cols[c] {
                residual[i] -= a * self.xb[r];
            }
        }
        for (i, &d) in residual.iter().enumerate() {
            if d != 0.0 {
                let col = &self.binv[i * self.m..(i + 1) * self.m];
                for (x, v) in self.xb.iter_mut().zip(col) {
                    *x += d * v;
                }
            }
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        self.cost[j] - self.sf.cols[j].iter().map(|&(i, a)| self.duals[i] * a).sum::<f64>()
    }

    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.sf.cols.len() {
            if self.position[j] != NONBASIC || !self.may_enter[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            if d < -self.tol {
                if bland {
                    return Some((j, d));
                }
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        best
    }

    /// `α = B⁻¹ a_q`.
    fn ftran(&mut self, q: usize) {
        let m = self.m;
        self.alpha.iter_mut().for_each(|a| *a = 0.0);
        for &(i, a) in &self.sf.cols[q] {
            let col = &self.binv[i * m..(i + 1) * m];
            for (al, v) in self.alpha.iter_mut().zip(col) {
                *al += a * v;
            }
        }
    }

    /// Two-pass (Harris) ratio test. The first pass finds the largest step
    /// that keeps every basic variable above `-HARRIS_SLACK`; the second picks, among
    /// rows blocking within that step, the one with the largest pivot. Under
    /// Bland's rule only exact ties are considered and the smallest basic
    /// index wins among pivots that are not tiny relative to the best one.
    fn ratio_test(&self, bland: bool) -> Option<usize> {
        let max_alpha = self.alpha.iter().fold(0.0_f64, |m, &a| m.max(a));
        if max_alpha <= self.tol {
            return None;
        }
        let piv_tol = PIVOT_ABSOLUTE.max(PIVOT_RELATIVE * max_alpha);
        let candidates = || {
            (0..self.m)
                .filter(move |&r| self.alpha[r] > piv_tol)
                .map(move |r| (r, self.xb[r].max(0.0) / self.alpha[r]))
        };
        let bound = if bland {
            let min = candidates().fold(f64::INFINITY, |m, (_, t)| m.min(t));
            min + 1e-12 * (1.0 + min)
        } else {
            candidates()
                .map(|(r, _)| (self.xb[r].max(0.0) + HARRIS_SLACK) / self.alpha[r])
                .fold(f64::INFINITY, f64::min)
        };
        let blocking = candidates().filter(|&(_, t)| t <= bound).map(|(r, _)| r);
        if bland {
            let best = blocking.clone().map(|r| self.alpha[r]).fold(0.0, f64::max);
            blocking
                .filter(|&r| self.alpha[r] >= BLAND_PIVOT_FLOOR * best)
                .min_by_key(|&r| self.basis[r])
        } else {
            blocking.max_by(|&a, &b| self.alpha[a].total_cmp(&self.alpha[b]).then(b.cmp(&a)))
        }
    }

    /// Replaces the basic variable in row `p` by column `q`, moving it by
    /// `theta`. `self.alpha` must hold `B⁻¹ a_q`.
    fn pivot(&mut self, p: usize, q: usize, theta: f64, dq: f64) {
        let m = self.m;
        let ap = self.alpha[p];
        for r in 0..m {
            self.xb[r] -= theta * self.alpha[r];
        }
        self.xb[p] = theta;

        self.touched.clear();
        self.touched.extend((0..m).filter(|&r| r != p && self.alpha[r] != 0.0));
        for c in 0..m {
            let base = c * m;
            let bpc = self.binv[base + p];
            if bpc == 0.0 {
                continue;
            }
            let rho = bpc / ap;
            let col = &mut self.binv[base..base + m];
            for &r in &self.touched {
                col[r] -= self.alpha[r] * rho;
            }
            col[p] = rho;
            self.duals[c] += dq * rho;
        }

        let leaving = self.basis[p];
        self.position[leaving] = NONBASIC;
        if self.sf.kind[leaving] == ColKind::Artificial {
            self.may_enter[leaving] = false;
        }
        self.basis[p] = q;
        self.position[q] = p;
        self.iterations += 1;
    }

    fn objective(&self) -> f64 {
        self.basis.iter().zip(&self.xb).map(|(&c, x)| self.cost[c] * x).sum()
    }

    fn run_phase(&mut self, mut trace: Option<(&mut Vec<f64>, f64)>) -> PhaseOutcome {
        self.refresh();
        let mut degenerate_run = 0usize;
        let mut since_refresh = 0usize;
        let mut objective = self.objective();
        loop {
            if since_refresh >= REFRESH_EVERY {
                self.refresh();
                objective = self.objective();
                since_refresh = 0;
            }
            let bland = degenerate_run >= self.bland_after;
            let entering = match self.price(bland) {
                Some(e) => Some(e),
                None if since_refresh > 0 => {
                    self.refresh();
                    objective = self.objective();
                    since_refresh = 0;
                    self.price(bland)
                }
                None => None,
            };
            let Some((q, dq)) = entering else {
                return PhaseOutcome::Optimal;
            };
            if self.iterations >= self.budget {
                return PhaseOutcome::IterationLimit;
            }
            self.ftran(q);
            let Some(p) = self.ratio_test(bland) else {
                return PhaseOutcome::Unbounded;
            };
            let theta = self.xb[p].max(0.0) / self.alpha[p];
            self.pivot(p, q, theta, dq);
            since_refresh += 1;
            objective += theta * dq;
            if let Some((values, offset)) = trace.as_mut() {
                values.push(objective + *offset);
            }
            if theta <= DEGENERATE_STEP {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
        }
    }

    /// Pivots zero-level artificials out of the basis where possible. An
    /// artificial that cannot leave sits on a redundant row and stays at zero.
    fn drive_out_artificials(&mut self) {
        let m = self.m;
        for p in 0..m {
            if self.sf.kind[self.basis[p]] != ColKind::Artificial {
                continue;
            }
            let rho: Vec<f64> = (0..m).map(|c| self.binv[c * m + p]).collect();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.sf.cols.len() {
                if self.position[j] != NONBASIC || self.sf.kind[j] == ColKind::Artificial {
                    continue;
                }
                let v: f64 = self.sf.cols[j].iter().map(|&(i, a)| rho[i] * a).sum();
                if v.abs() > self.tol && best.is_none_or(|(_, b)| v.abs() > b.abs()) {
                    best = Some((j, v));
                }
            }
            if let Some((q, _)) = best {
                self.ftran(q);
                let theta = self.xb[p] / self.alpha[p];
                let dq = self.reduced_cost(q);
                self.pivot(p, q, theta, dq);
            }
        }
    }

    fn column_values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.sf.cols.len()];
        for (r, &c) in self.basis.iter().enumerate() {
            x[c] = self.xb[r];
        }
        x
    }
}

/// Solves `lp` to optimality, or reports why it could not.
///
/// Errors only on malformed input; infeasible, unbounded and over-budget
/// programs come back as the corresponding [`LpStatus`].
pub fn solve(lp: &LinearProgram, options: &SolveOptions) -> Result<LpSolution> {
    lp.validate()?;
    let sf = StandardForm::build(lp);
    let budget = options.iteration_budget(lp);
    let mut simplex = Simplex::new(&sf, budget, options.tol, options.bland_after);

    for (j, kind) in sf.kind.iter().enumerate() {
        simplex.cost[j] = if *kind == ColKind::Artificial { 1.0 } else { 0.0 };
    }
    let phase_one = simplex.run_phase(None);
    let phase_one_iterations = simplex.iterations;

    let finish = |simplex: &Simplex, status: LpStatus, trace: Vec<f64>| {
        let x = simplex.column_values();
        let variables: Vec<f64> = sf
            .var_map
            .iter()
            .map(|&(plus, minus, shift)| shift + x[plus] - minus.map_or(0.0, |c| x[c]))
            .collect();
        LpSolution {
            objective_value: lp.objective_value(&variables),
            variables,
            status,
            iterations: simplex.iterations,
            phase_one_iterations,
            objective_trace: trace,
        }
    };

    match phase_one {
        PhaseOutcome::IterationLimit => return Ok(finish(&simplex, LpStatus::IterationLimit, Vec::new())),
        // Phase I is bounded below by zero.
        PhaseOutcome::Unbounded => unreachable!("phase I objective is bounded"),
        PhaseOutcome::Optimal => {}
    }
    simplex.recompute_primal();
    let infeasibility = simplex.objective();
    let rhs_scale = 1.0 + sf.rhs.iter().fold(0.0_f64, |m, b| m.max(b.abs()));
    if infeasibility > options.tol * rhs_scale {
        return Ok(finish(&simplex, LpStatus::Infeasible, Vec::new()));
    }

    simplex.drive_out_artificials();
    for (j, kind) in sf.kind.iter().enumerate() {
        if *kind == ColKind::Artificial {
            simplex.may_enter[j] = false;
        }
        simplex.cost[j] = sf.cost[j];
    }
    let mut trace = Vec::new();
    let offset: f64 = lp
        .objective()
        .iter()
        .zip(&sf.var_map)
        .map(|(c, &(_, _, shift))| c * shift)
        .sum();
    let outcome = if options.record_trace {
        simplex.run_phase(Some((&mut trace, offset)))
    } else {
        simplex.run_phase(None)
    };
    simplex.refresh();
    simplex.refine_primal();
    let status = match outcome {
        PhaseOutcome::Optimal => LpStatus::Optimal,
        PhaseOutcome::Unbounded => LpStatus::Unbounded,
        PhaseOutcome::IterationLimit => LpStatus::IterationLimit,
    };
    Ok(finish(&simplex, status, trace))
}
