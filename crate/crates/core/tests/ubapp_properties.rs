use dpbayes_core::bernoulli::{build_model, BernoulliModelSpec};
use dpbayes_core::lp::feasibility_residuals;
use dpbayes_core::ubapp::{
    analytic_mse, best_constant_kernel, build_program, nonprivate_kernel, solve_ubapp, variable_index,
};
use dpbayes_core::{
    make_uniform_grid, square_loss_matrix, FiniteModel, Matrix, NeighborGraph, ObservationSpace, SolveOptions,
};
use proptest::prelude::*;

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Random model: `m` grid points, `n` observations, random likelihood
/// columns and prior, a random connected neighbor relation.
fn random_model() -> impl Strategy<Value = FiniteModel> {
    (2usize..=6, 2usize..=5)
        .prop_flat_map(|(m, n)| {
            (
                Just(m),
                Just(n),
                proptest::collection::vec(proptest::collection::vec(0.05f64..1.0, n), m),
                proptest::collection::vec(0.1f64..1.0, m),
                proptest::collection::vec(any::<bool>(), n * n),
            )
        })
        .prop_map(|(m, n, cols, prior, extra)| {
            let grid = make_uniform_grid(0.0, 1.0, m).unwrap();
            let cols: Vec<Vec<f64>> = cols.into_iter().map(normalize).collect();
            let q = Matrix::from_fn(n, m, |i, j| cols[j][i]);
            let mut neighbors = NeighborGraph::path(n);
            for i in 0..n {
                for j in (i + 2)..n {
                    if extra[i * n + j] {
                        neighbors.insert(i, j).unwrap();
                    }
                }
            }
            FiniteModel::new(
                grid.clone(),
                ObservationSpace::indexed(n).unwrap(),
                neighbors,
                q,
                square_loss_matrix(&grid),
                normalize(prior),
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn optimal_kernel_invariants(model in random_model(), eps in 0.01f64..8.0) {
        let opts = SolveOptions::default();
        let r = solve_ubapp(&model, eps, &opts).unwrap();
        prop_assert!(r.mse >= 0.0);
        prop_assert!(r.dp_residual <= 1e-8);
        prop_assert!(r.kernel.column_sum_residual() <= 1e-8);
        prop_assert!(r.lp_residuals.is_feasible(1e-8), "{:?}", r.lp_residuals);

        // post-hoc check of the extracted kernel against the program itself
        let lp = build_program(&model, eps).unwrap();
        let (nt, no) = (model.num_params(), model.num_obs());
        let mut v = vec![0.0; nt * no];
        for i in 0..no {
            for k in 0..nt {
                v[variable_index(nt, k, i)] = r.kernel.prob(k, i);
            }
        }
        let res = feasibility_residuals(&lp, &v).unwrap();
        prop_assert!(res.is_feasible(1e-8), "{:?}", res);

        let floor = analytic_mse(&model, &nonprivate_kernel(&model)).unwrap();
        let ceiling = analytic_mse(&model, &best_constant_kernel(&model, eps)).unwrap();
        prop_assert!(r.mse >= floor - 1e-9, "{} < {}", r.mse, floor);
        prop_assert!(r.mse <= ceiling + 1e-6, "{} > {}", r.mse, ceiling);
    }

    #[test]
    fn risk_is_monotone_in_epsilon(model in random_model(), a in 0.01f64..5.0, b in 0.01f64..5.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let opts = SolveOptions::default();
        let r_lo = solve_ubapp(&model, lo, &opts).unwrap();
        let r_hi = solve_ubapp(&model, hi, &opts).unwrap();
        prop_assert!(r_lo.mse >= r_hi.mse - 1e-6, "{} < {}", r_lo.mse, r_hi.mse);
    }

    #[test]
    fn any_constant_kernel_is_feasible(model in random_model(), eps in 0.001f64..10.0, w in proptest::collection::vec(0.01f64..1.0, 6)) {
        let lp = build_program(&model, eps).unwrap();
        let nt = model.num_params();
        let pmf = normalize(w[..nt].to_vec());
        let mut v = vec![0.0; lp.num_vars()];
        for i in 0..model.num_obs() {
            for k in 0..nt {
                v[variable_index(nt, k, i)] = pmf[k];
            }
        }
        prop_assert!(feasibility_residuals(&lp, &v).unwrap().is_feasible(1e-12));
    }
}

#[test]
fn huge_epsilon_matches_columnwise_minimizer() {
    for (k, m) in [(1, 3), (5, 21), (10, 101), (20, 101)] {
        let model = build_model(&BernoulliModelSpec::new(k, m).unwrap()).unwrap();
        let r = solve_ubapp(&model, 50.0, &SolveOptions::default()).unwrap();
        let target = analytic_mse(&model, &nonprivate_kernel(&model)).unwrap();
        assert!((r.mse - target).abs() <= 1e-8, "K={k} M={m}: {} vs {target}", r.mse);
    }
}
