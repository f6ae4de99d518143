//! Brute-force LP oracle: enumerate every basic solution of a small program
//! and keep the best feasible one. Independent of the simplex code; only
//! usable for a handful of variables.

use dpbayes_core::LinearProgram;
use nalgebra::{DMatrix, DVector};

struct Constraint {
    coeffs: Vec<f64>,
    rhs: f64,
}

fn dense(n: usize, coeffs: &[(usize, f64)]) -> Vec<f64> {
    let mut row = vec![0.0; n];
    for &(j, a) in coeffs {
        row[j] += a;
    }
    row
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum objective over all vertices of `lp` (all lower bounds must be
/// finite), or `None` if no vertex is feasible. Also returns the minimizer.
pub fn vertex_minimum(lp: &LinearProgram, feas_tol: f64) -> Option<(f64, Vec<f64>)> {
    let n = lp.num_vars();
    assert!(n <= 10, "vertex enumeration is exponential");
    // Equalities are picked like any other constraint and enforced by the
    // feasibility check, so zero or dependent equality rows need no care.
    let mut constraints: Vec<Constraint> = lp
        .eq_rows()
        .iter()
        .chain(lp.ineq_rows())
        .map(|r| Constraint {
            coeffs: dense(n, &r.coeffs),
            rhs: r.rhs,
        })
        .collect();
    for (j, &l) in lp.lower_bounds().iter().enumerate() {
        assert!(l.is_finite());
        let mut row = vec![0.0; n];
        row[j] = 1.0;
        constraints.push(Constraint { coeffs: row, rhs: l });
    }

    let feasible = |x: &DVector<f64>| {
        let dot = |c: &[f64]| c.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>();
        lp.eq_rows()
            .iter()
            .all(|r| (dot(&dense(n, &r.coeffs)) - r.rhs).abs() <= feas_tol)
            && lp
                .ineq_rows()
                .iter()
                .all(|r| dot(&dense(n, &r.coeffs)) <= r.rhs + feas_tol)
            && lp.lower_bounds().iter().zip(x.iter()).all(|(l, v)| *v >= l - feas_tol)
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for chosen in combinations(constraints.len(), n) {
        let active: Vec<&Constraint> = chosen.iter().map(|&i| &constraints[i]).collect();
        let a = DMatrix::from_fn(n, n, |r, c| active[r].coeffs[c]);
        let b = DVector::from_iterator(n, active.iter().map(|c| c.rhs));
        let svd = a.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smax == 0.0 || smin <= 1e-12 * smax {
            continue;
        }
        let Some(x) = a.lu().solve(&b) else { continue };
        if !feasible(&x) {
            continue;
        }
        let obj: f64 = lp.objective().iter().zip(x.iter()).map(|(c, v)| c * v).sum();
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, x.iter().copied().collect()));
        }
    }
    best
}
