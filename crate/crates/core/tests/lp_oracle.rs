#[path = "common/vertex_oracle.rs"]
mod vertex_oracle;

use dpbayes_core::bernoulli::{build_model, BernoulliModelSpec};
use dpbayes_core::lp::{feasibility_residuals, solve};
use dpbayes_core::ubapp::{build_program, solve_ubapp};
use dpbayes_core::{LinearProgram, LpStatus, SolveOptions};
use proptest::prelude::*;
use vertex_oracle::vertex_minimum;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + b.abs())
}

#[test]
fn single_trial_programs_match_enumeration() {
    let model = build_model(&BernoulliModelSpec::new(1, 3).unwrap()).unwrap();
    for eps in [0.1, 0.5, 2.0] {
        let lp = build_program(&model, eps).unwrap();
        assert_eq!(lp.num_vars(), 6);
        let (oracle, _) = vertex_minimum(&lp, 1e-10).unwrap();
        let report = solve_ubapp(&model, eps, &SolveOptions::default()).unwrap();
        let raw = solve(&lp, &SolveOptions::default()).unwrap();
        assert!(
            close(raw.objective_value, oracle),
            "eps {eps}: {} vs {oracle}",
            raw.objective_value
        );
        assert!(close(report.mse, oracle), "eps {eps}: {} vs {oracle}", report.mse);
    }
}

#[test]
fn two_by_two_program_matches_enumeration() {
    let mut lp = LinearProgram::with_objective(vec![0.1, 0.35, 0.4, 0.15]);
    let f = 1.3_f64.exp();
    lp.add_le([(0, 1.0), (2, -f)], 0.0)
        .add_le([(1, 1.0), (3, -f)], 0.0)
        .add_le([(2, 1.0), (0, -f)], 0.0)
        .add_le([(3, 1.0), (1, -f)], 0.0)
        .add_eq([(0, 1.0), (1, 1.0)], 1.0)
        .add_eq([(2, 1.0), (3, 1.0)], 1.0);
    let (oracle, _) = vertex_minimum(&lp, 1e-10).unwrap();
    let s = solve(&lp, &SolveOptions::default()).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!(close(s.objective_value, oracle));
}

#[test]
fn bernoulli_solution_is_feasible() {
    let model = build_model(&BernoulliModelSpec::new(5, 21).unwrap()).unwrap();
    let lp = build_program(&model, 0.1).unwrap();
    let s = solve(&lp, &SolveOptions::default()).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    let r = feasibility_residuals(&lp, &s.variables).unwrap();
    assert!(
        r.max_ineq_violation <= 1e-8 && r.max_eq_violation <= 1e-8 && r.min_variable >= -1e-8,
        "{r:?}"
    );
}

#[test]
fn identical_inputs_give_identical_solutions() {
    let model = build_model(&BernoulliModelSpec::new(6, 31).unwrap()).unwrap();
    let lp = build_program(&model, 0.8).unwrap();
    let opts = SolveOptions {
        record_trace: true,
        ..SolveOptions::default()
    };
    let a = solve(&lp, &opts).unwrap();
    let b = solve(&lp, &opts).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
    assert!(a
        .variables
        .iter()
        .zip(&b.variables)
        .all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn intermediate_objectives_bound_the_optimum() {
    // every phase II iterate is primal feasible, so its objective can only
    // sit above the optimum
    let model = build_model(&BernoulliModelSpec::new(4, 21).unwrap()).unwrap();
    let lp = build_program(&model, 1.0).unwrap();
    let opts = SolveOptions {
        record_trace: true,
        ..SolveOptions::default()
    };
    let s = solve(&lp, &opts).unwrap();
    assert!(!s.objective_trace.is_empty());
    for v in &s.objective_trace {
        assert!(*v >= s.objective_value - opts.tol, "{v} < {}", s.objective_value);
    }
}

/// Random programs over at most 8 non-negative variables. A box row keeps
/// them bounded; `offset` shifts right-hand sides so some are infeasible.
fn small_program() -> impl Strategy<Value = LinearProgram> {
    (2usize..=8)
        .prop_flat_map(|n| {
            let row = (proptest::collection::vec(-3i32..=3, n), -2i32..=6);
            (
                Just(n),
                proptest::collection::vec(-5i32..=5, n),
                proptest::collection::vec(row.clone(), 0..4),
                proptest::collection::vec(row, 0..2),
            )
        })
        .prop_map(|(n, c, le, eq)| {
            let mut lp = LinearProgram::with_objective(c.into_iter().map(f64::from).collect());
            lp.add_le((0..n).map(|j| (j, 1.0)), 10.0);
            for (a, b) in le {
                lp.add_le(a.into_iter().enumerate().map(|(j, v)| (j, f64::from(v))), f64::from(b));
            }
            for (a, b) in eq {
                lp.add_eq(
                    a.into_iter().enumerate().map(|(j, v)| (j, f64::from(v) / 2.0)),
                    f64::from(b) / 3.0,
                );
            }
            lp
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn simplex_agrees_with_enumeration(lp in small_program()) {
        let s = solve(&lp, &SolveOptions::default()).unwrap();
        match vertex_minimum(&lp, 1e-9) {
            None => prop_assert_eq!(s.status, LpStatus::Infeasible),
            Some((oracle, _)) => {
                prop_assert_eq!(s.status, LpStatus::Optimal);
                prop_assert!(close(s.objective_value, oracle), "{} vs {}", s.objective_value, oracle);
                let r = feasibility_residuals(&lp, &s.variables).unwrap();
                prop_assert!(r.is_feasible(1e-8), "{:?}", r);
            }
        }
    }

    #[test]
    fn bland_from_the_start_agrees(lp in small_program()) {
        let opts = SolveOptions { bland_after: 0, ..SolveOptions::default() };
        let s = solve(&lp, &opts).unwrap();
        let d = solve(&lp, &SolveOptions::default()).unwrap();
        prop_assert_eq!(s.status, d.status);
        if s.status == LpStatus::Optimal {
            prop_assert!(close(s.objective_value, d.objective_value));
        }
    }
}
