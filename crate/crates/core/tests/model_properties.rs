use dpbayes_core::bernoulli::{build_model, exact_posterior_mean, BernoulliModelSpec};
use dpbayes_core::mechanisms::posterior_mean;
use dpbayes_core::{make_uniform_grid, square_loss_matrix, validate_model, FiniteModel, NeighborGraph};
use proptest::prelude::*;

proptest! {
    #[test]
    fn uniform_grid_shape(lower in -100.0f64..100.0, width in 1e-3f64..50.0, m in 2usize..500) {
        let upper = lower + width;
        let g = make_uniform_grid(lower, upper, m).unwrap();
        prop_assert_eq!(g.len(), m);
        prop_assert_eq!(g.point(0), lower);
        prop_assert_eq!(g.point(m - 1), upper);
        prop_assert!(g.points().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn square_loss_structure(m in 2usize..40) {
        let g = make_uniform_grid(0.0, 1.0, m).unwrap();
        let l = square_loss_matrix(&g);
        prop_assert!(l.is_symmetric());
        for a in 0..m {
            for b in 0..m {
                if a == b {
                    prop_assert_eq!(l.get(a, b), 0.0);
                } else {
                    prop_assert!(l.get(a, b) > 0.0);
                }
            }
        }
    }

    #[test]
    fn neighbor_pairs_are_symmetric(pairs in proptest::collection::vec((0usize..10, 0usize..10), 0..30)) {
        let mut g = NeighborGraph::new();
        for (i, j) in pairs {
            let _ = g.insert(i, j);
        }
        for (i, j) in g.pairs() {
            prop_assert!(i != j);
            prop_assert!(g.contains(j, i));
        }
    }

    #[test]
    fn bernoulli_json_round_trip(k in 1usize..8, m in 2usize..15) {
        let model = build_model(&BernoulliModelSpec::new(k, m).unwrap()).unwrap();
        let back = FiniteModel::from_json_str(&model.to_json_string().unwrap()).unwrap();
        prop_assert_eq!(back, model);
    }
}

#[test]
fn bernoulli_models_validate() {
    for k in 1..=30 {
        for m in [3, 21, 201] {
            let model = build_model(&BernoulliModelSpec::new(k, m).unwrap()).unwrap();
            assert!(validate_model(&model).is_empty(), "K={k} M={m}");
            let expected: Vec<(usize, usize)> = (0..k).flat_map(|y| [(y, y + 1), (y + 1, y)]).collect();
            let mut got: Vec<(usize, usize)> = model.neighbors().pairs().collect();
            got.sort_unstable();
            let mut expected = expected;
            expected.sort_unstable();
            assert_eq!(got, expected);
        }
    }
}

#[test]
fn grid_posterior_mean_within_one_cell() {
    for k in [1, 5, 10, 20] {
        for m in [21, 101, 201] {
            let model = build_model(&BernoulliModelSpec::new(k, m).unwrap()).unwrap();
            for y in 0..=k {
                let gap = (posterior_mean(&model, y).unwrap() - exact_posterior_mean(k, y).unwrap()).abs();
                assert!(gap <= 1.0 / (m as f64 - 1.0), "K={k} M={m} y={y}: {gap}");
            }
        }
    }
}
