mod common;

use common::{mixed_net, regression_data, uniform_net};
use ecprune::data::Dataset;
use ecprune::matrix::Matrix;
use ecprune::network::{Activation, Layer, Network};
use ecprune::pruning::{
    apply_prune, compute_scores, ec_scores, gradient_magnitude_scores, linearized_objective, magnitude_scores,
    nonlinear_scores, prune_count, pruning_ratio, random_scores, select_mask, MaskSet, PruneConfig, ScoreSet, Strategy as Method,
};
use ecprune::training::LossKind;
use ecprune::verification::{brute_discrepancy, fd_loss_gradient, rel_err, FdSpec};
use proptest::prelude::*;

fn column(xs: &[f64]) -> Dataset {
    Dataset::regression(
        "col",
        Matrix::new(xs.len(), 1, xs.to_vec()).unwrap(),
        Matrix::zeros(xs.len(), 1),
    )
    .unwrap()
}

fn scalar_net(w: f64, b: f64) -> Network {
    Network::new(vec![Layer::new(Matrix::filled(1, 1, w), vec![b], Activation::Identity).unwrap()]).unwrap()
}

#[test]
fn scalar_example_three_ways() {
    let net = scalar_net(3.0, 0.0);
    let data = column(&[1.0, 2.0, 3.0]);
    let (ec, ec_c) = ec_scores(&net, &data, &PruneConfig::default()).unwrap();
    let (nl, nl_c) = nonlinear_scores(&net, &data, &PruneConfig::default()).unwrap();
    assert!((ec_c.get(0, 0, 0) - 6.0).abs() < 1e-12);
    assert!((nl_c.get(0, 0, 0) - 6.0).abs() < 1e-12);
    assert!((ec.get(0, 0, 0) - 6.0).abs() < 1e-12);
    assert!((nl.get(0, 0, 0) - 6.0).abs() < 1e-12);
    assert!((brute_discrepancy(&net, &data, 0, 0, 0, 6.0).unwrap() - 6.0).abs() < 1e-12);
    // grid over δb: the minimum sits at the closed form
    let best = (0..=1200)
        .map(|k| k as f64 * 0.01)
        .min_by(|a, b| {
            linearized_objective(&net, &data, 0, 0, 0, *a)
                .unwrap()
                .total_cmp(&linearized_objective(&net, &data, 0, 0, 0, *b).unwrap())
        })
        .unwrap();
    assert!((best - 6.0).abs() < 0.01);
}

#[test]
fn zero_weight_has_nothing_to_compensate() {
    let w = Matrix::from_rows(&[[0.0, 1.0]]).unwrap();
    let net = Network::new(vec![Layer::new(w, vec![0.0], Activation::Identity).unwrap()]).unwrap();
    let data = regression_data(6, 2, 1, 1);
    for s in [Method::ElimCompensation, Method::NonLinearDirect] {
        let (sc, c) = compute_scores(&net, &data, &PruneConfig::with_strategy(s), LossKind::MeanSquaredError).unwrap();
        assert_eq!(sc.get(0, 0, 0), 0.0);
        assert_eq!(c.get(0, 0, 0), 0.0);
    }
    let g = gradient_magnitude_scores(&net, &data, LossKind::MeanSquaredError).unwrap();
    assert_eq!(g.get(0, 0, 0), 0.0);
}

#[test]
fn magnitude_examples() {
    let zero = Network::new(vec![Layer::new(Matrix::zeros(2, 3), vec![5.0, -1.0], Activation::Identity).unwrap()]).unwrap();
    assert!(magnitude_scores(&zero).layer(0).as_slice().iter().all(|&v| v == 0.0));
    let mut other = zero.clone();
    other.layer_mut(0).bias_mut()[0] = 100.0;
    assert_eq!(magnitude_scores(&zero), magnitude_scores(&other));
}

#[test]
fn non_compensating_strategies_return_zero_compensation() {
    let net = mixed_net(&[3, 4, 2], 6);
    let data = regression_data(8, 3, 2, 6);
    for s in [Method::Magnitude, Method::GradientMagnitude, Method::Random] {
        let (_, c) = compute_scores(&net, &data, &PruneConfig::with_strategy(s), LossKind::MeanSquaredError).unwrap();
        assert!(c.layers().iter().all(|m| m.as_slice().iter().all(|&v| v == 0.0)));
    }
}

#[test]
fn critical_point_has_zero_gradient_scores() {
    // bias already fits the constant targets and weights are zero
    let net = Network::new(vec![Layer::new(Matrix::zeros(1, 2), vec![0.25], Activation::Identity).unwrap()]).unwrap();
    let data = Dataset::regression("c", Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap(), Matrix::filled(2, 1, 0.25)).unwrap();
    let g = gradient_magnitude_scores(&net, &data, LossKind::MeanSquaredError).unwrap();
    assert!(g.layer(0).as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn gradient_magnitude_matches_fd() {
    for seed in 0..5 {
        let net = mixed_net(&[3, 4, 2], seed);
        let data = regression_data(10, 3, 2, seed);
        let s = gradient_magnitude_scores(&net, &data, LossKind::MeanSquaredError).unwrap();
        let fd = fd_loss_gradient(&net, &data, LossKind::MeanSquaredError, FdSpec::default());
        for (l, (g, _, _)) in fd.iter().enumerate() {
            for (k, (&w, &gw)) in net.layer(l).weights().as_slice().iter().zip(g.as_slice()).enumerate() {
                assert!(rel_err(s.layer(l).as_slice()[k], (w * gw).abs(), 1e-4) < 1e-5);
            }
        }
    }
}

#[test]
fn random_masks_are_roughly_uniform() {
    let net = Network::new(vec![Layer::new(Matrix::filled(2, 2, 1.0), vec![0.0; 2], Activation::Identity).unwrap()]).unwrap();
    let mut pruned = [0usize; 4];
    for seed in 0..1000 {
        let m = select_mask(&random_scores(&net, seed), 0.5).unwrap();
        assert_eq!(m.pruned_count(), 2);
        for (k, &keep) in m.layer(0).as_slice().iter().enumerate() {
            pruned[k] += usize::from(!keep);
        }
    }
    for p in pruned {
        assert!((350..=650).contains(&p), "{pruned:?}");
    }
}

#[test]
fn random_masks_differ_between_seeds() {
    let net = mixed_net(&[6, 8, 3], 0);
    let a = select_mask(&random_scores(&net, 1), 0.5).unwrap();
    let b = select_mask(&random_scores(&net, 2), 0.5).unwrap();
    assert_ne!(a, b);
}

#[test]
fn one_sample_makes_last_layer_free() {
    let net = Network::random(&[3, 5, 2], Activation::prelu(), 1).unwrap();
    let data = regression_data(1, 3, 2, 1);
    let (s, _) = nonlinear_scores(&net, &data, &PruneConfig::default()).unwrap();
    assert!(s.layer(1).as_slice().iter().all(|&v| v < 1e-28));
    let affine = uniform_net(&[3, 4, 2], Activation::Identity, 1);
    let (s, _) = nonlinear_scores(&affine, &data, &PruneConfig::default()).unwrap();
    assert!(s.layers().iter().all(|m| m.as_slice().iter().all(|&v| v < 1e-28)));
}

#[test]
fn brute_discrepancy_examples() {
    let net = mixed_net(&[3, 4, 2], 2);
    let data = regression_data(1, 3, 2, 2);
    let trace = net.forward(data.input(0)).unwrap();
    let signal = trace.signal(&net, 1, 1, 2);
    assert!(brute_discrepancy(&net, &data, 1, 1, 2, signal).unwrap() < 1e-28);

    let data = regression_data(7, 3, 2, 3);
    let mut mask = MaskSet::ones(&net);
    mask.layer_mut(0).set(2, 0, false);
    let mut expected = 0.0;
    for s in 0..data.len() {
        let y = net.forward(data.input(s)).unwrap();
        let yp = net.masked_forward(&mask, data.input(s)).unwrap();
        expected += y.output().iter().zip(yp.output()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    expected /= data.len() as f64;
    assert!(rel_err(brute_discrepancy(&net, &data, 0, 2, 0, 0.0).unwrap(), expected, 1e-300) < 1e-12);
    assert!(brute_discrepancy(&net, &data, 0, 9, 0, 0.0).is_err());
}

#[test]
fn affine_grid_minimum_is_closed_form() {
    let net = uniform_net(&[3, 4, 2], Activation::Identity, 5);
    let data = regression_data(20, 3, 2, 5);
    let (_, c) = ec_scores(&net, &data, &PruneConfig::default()).unwrap();
    for (l, i, j) in [(0, 1, 2), (1, 0, 3)] {
        let d = c.get(l, i, j);
        let step = 1e-3;
        let best = (-2000..=2000)
            .map(|k| d + k as f64 * step * 0.37)
            .min_by(|a, b| {
                brute_discrepancy(&net, &data, l, i, j, *a)
                    .unwrap()
                    .total_cmp(&brute_discrepancy(&net, &data, l, i, j, *b).unwrap())
            })
            .unwrap();
        assert!((best - d).abs() <= step);
    }
}

#[test]
fn last_layer_exactness() {
    let net = Network::random(&[3, 5, 2], Activation::prelu(), 7).unwrap();
    let data = regression_data(15, 3, 2, 7);
    let (_, c) = ec_scores(&net, &data, &PruneConfig::default()).unwrap();
    let (i, j) = (1, 3);
    let mut mask = MaskSet::ones(&net);
    mask.layer_mut(1).set(i, j, false);
    let pruned = apply_prune(&net, &mask, Some(&c)).unwrap();
    for s in 0..data.len() {
        let t = net.forward(data.input(s)).unwrap();
        let y = t.output();
        let yp = pruned.predict(data.input(s)).unwrap();
        let change = t.signal(&net, 1, i, j) - c.get(1, i, j);
        assert!(((y[i] - yp[i]) - change).abs() < 1e-12);
        assert_eq!(y[1 - i], yp[1 - i]);
    }
}

#[test]
fn prune_without_compensation_is_masked_forward() {
    let net = mixed_net(&[4, 5, 3], 9);
    let data = regression_data(10, 4, 3, 9);
    let (s, _) = ec_scores(&net, &data, &PruneConfig::default()).unwrap();
    let mask = select_mask(&s, 0.4).unwrap();
    let pruned = apply_prune(&net, &mask, None).unwrap();
    for k in 0..data.len() {
        let masked = net.masked_forward(&mask, data.input(k)).unwrap();
        assert_eq!(pruned.predict(data.input(k)).unwrap(), masked.output());
    }
}

#[test]
fn subset_expectation_is_seeded() {
    let net = mixed_net(&[3, 4, 2], 4);
    let data = regression_data(50, 3, 2, 4);
    let cfg = PruneConfig { expectation_subset: Some(10), seed: 3, ..PruneConfig::default() };
    let a = ec_scores(&net, &data, &cfg).unwrap();
    assert_eq!(a, ec_scores(&net, &data, &cfg).unwrap());
    assert_ne!(a, ec_scores(&net, &data, &PruneConfig::default()).unwrap());
}

fn arb_scores() -> impl Strategy<Value = ScoreSet> {
    proptest::collection::vec((1usize..5, 1usize..5), 1..4).prop_flat_map(|shapes| {
        shapes
            .into_iter()
            .map(|(r, c)| proptest::collection::vec(0.0f64..10.0, r * c).prop_map(move |v| Matrix::new(r, c, v).unwrap()))
            .collect::<Vec<_>>()
            .prop_map(ScoreSet::new)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mask_prunes_exact_count(scores in arb_scores(), ratio in 0.0f64..=1.0) {
        let m = select_mask(&scores, ratio).unwrap();
        let total = scores.total();
        let n = prune_count(ratio, total);
        prop_assert_eq!(m.pruned_count(), n);
        prop_assert_eq!(pruning_ratio(&m, total), 1.0 - (total - n) as f64 / total as f64);
        // every pruned score is ≤ every kept score
        let mut max_pruned = f64::NEG_INFINITY;
        let mut min_kept = f64::INFINITY;
        for (l, s) in scores.layers().iter().enumerate() {
            for (v, &keep) in s.as_slice().iter().zip(m.layer(l).as_slice()) {
                if keep { min_kept = min_kept.min(*v) } else { max_pruned = max_pruned.max(*v) }
            }
        }
        prop_assert!(max_pruned <= min_kept);
    }

    #[test]
    fn mask_is_scale_invariant(scores in arb_scores(), ratio in 0.0f64..=1.0, factor in 1e-3f64..1e3) {
        prop_assert_eq!(select_mask(&scores, ratio).unwrap(), select_mask(&scores.scaled(factor), ratio).unwrap());
    }

    #[test]
    fn ec_scores_are_nonnegative_and_optimal(seed in any::<u64>()) {
        let net = mixed_net(&[3, 4, 3, 2], seed);
        let data = regression_data(12, 3, 2, seed);
        let (s, c) = ec_scores(&net, &data, &PruneConfig::default()).unwrap();
        prop_assert!(s.layers().iter().all(|m| m.as_slice().iter().all(|&v| v >= 0.0)));
        let l = (seed % 3) as usize;
        let (i, j) = ((seed / 3) as usize % net.layer(l).out_dim(), (seed / 7) as usize % net.layer(l).in_dim());
        let d = c.get(l, i, j);
        let at = linearized_objective(&net, &data, l, i, j, d).unwrap();
        prop_assert!(rel_err(at, s.get(l, i, j), 1e-12) < 1e-9);
        for e in [1e-4, 1e-2, 0.1, 1.0] {
            for probe in [d + e, d - e] {
                prop_assert!(linearized_objective(&net, &data, l, i, j, probe).unwrap() >= at);
            }
        }
    }

    #[test]
    fn affine_nets_agree_across_strategies(seed in any::<u64>()) {
        let net = uniform_net(&[3, 4, 2], Activation::Identity, seed);
        let data = regression_data(9, 3, 2, seed);
        let (ec, ec_c) = ec_scores(&net, &data, &PruneConfig::default()).unwrap();
        let (nl, nl_c) = nonlinear_scores(&net, &data, &PruneConfig::default()).unwrap();
        for l in 0..2 {
            for (a, b) in ec_c.layer(l).as_slice().iter().zip(nl_c.layer(l).as_slice()) {
                prop_assert!(rel_err(*a, *b, 1e-12) < 1e-9);
            }
            for (a, b) in ec.layer(l).as_slice().iter().zip(nl.layer(l).as_slice()) {
                prop_assert!(rel_err(*a, *b, 1e-12) < 1e-9);
            }
        }
    }

    #[test]
    fn nonlinear_equals_brute_force(seed in any::<u64>()) {
        let net = mixed_net(&[3, 4, 3, 2], seed);
        let data = regression_data(6, 3, 2, seed);
        let (s, c) = nonlinear_scores(&net, &data, &PruneConfig::default()).unwrap();
        for l in 0..net.num_layers() {
            let layer = net.layer(l);
            for i in 0..layer.out_dim() {
                for j in 0..layer.in_dim() {
                    prop_assert_eq!(s.get(l, i, j), brute_discrepancy(&net, &data, l, i, j, c.get(l, i, j)).unwrap());
                }
            }
        }
    }
}
