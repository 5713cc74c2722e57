mod common;

use ilploss::loss::{
    covariance_loss, covariance_loss_pairwise, negative_loss, positive_loss, sample_terms, soft_assignment, LossHyper,
};
use ilploss::polytope::{cost_constraint, Hyperplane, IntBox, LearnablePolytope};
use proptest::prelude::*;

fn poly_from(units: &[(Vec<f64>, f64, Vec<f64>, bool)], n: usize) -> LearnablePolytope {
    let mut p = LearnablePolytope::empty(IntBox::uniform(-3, 3, n).unwrap(), 0.05).unwrap();
    for (a, r, o, eq) in units {
        let h = Hyperplane::new(a.clone(), *r, o.clone()).unwrap();
        if *eq {
            p.push_equality(h).unwrap();
        } else {
            p.push_inequality(h).unwrap();
        }
    }
    p
}

fn units(n: usize, max: usize) -> impl Strategy<Value = Vec<(Vec<f64>, f64, Vec<f64>, bool)>> {
    prop::collection::vec(
        (
            prop::collection::vec(-2.0f64..2.0, n).prop_filter("zero normal", |a| a.iter().any(|v| v.abs() > 0.05)),
            -2.0f64..2.0,
            prop::collection::vec(-1.0f64..1.0, n),
            any::<bool>(),
        ),
        1..max,
    )
}

fn points(n: usize, k: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec(prop::collection::vec(-3i64..=3, n), k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn soft_assignment_sums_to_one_and_commutes_with_permutation(
        d in prop::collection::vec(-50.0f64..50.0, 1..20),
        tau in prop::sample::select(vec![1e-6, 1e-3, 0.1, 1.0, 10.0]),
        perm_seed in any::<u64>(),
    ) {
        let w = soft_assignment(&d, tau).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|v| *v >= 0.0));
        let mut order: Vec<usize> = (0..d.len()).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut ilploss::rng::rng_from(perm_seed));
        let dp: Vec<f64> = order.iter().map(|&i| d[i]).collect();
        let wp = soft_assignment(&dp, tau).unwrap();
        for (k, &i) in order.iter().enumerate() {
            prop_assert!((wp[k] - w[i]).abs() <= 1e-15, "{} vs {}", wp[k], w[i]);
        }
    }

    #[test]
    fn negative_loss_is_an_average_over_the_negative_set(
        (u, y, a, b) in (1usize..6).prop_flat_map(|n| (units(n, 5), prop::collection::vec(-3i64..=3, n), points(n, 1..6), points(n, 1..6))),
        c_seed in prop::collection::vec(0.1f64..1.0, 6),
        tau in prop::sample::select(vec![0.1, 1.0]),
    ) {
        let n = y.len();
        let poly = poly_from(&u, n);
        let cost_row = cost_constraint(&c_seed[..n], &y).unwrap();
        let hyper = LossHyper::new(0.01, 0.01, tau).unwrap();
        let la = negative_loss(&poly, &cost_row, &a, &hyper).unwrap();
        let lb = negative_loss(&poly, &cost_row, &b, &hyper).unwrap();

        let doubled: Vec<Vec<i64>> = a.iter().chain(&a).cloned().collect();
        let l2 = negative_loss(&poly, &cost_row, &doubled, &hyper).unwrap();
        prop_assert!((l2 - la).abs() <= 1e-12 * la.abs().max(1.0));

        let joined: Vec<Vec<i64>> = a.iter().chain(&b).cloned().collect();
        let lj = negative_loss(&poly, &cost_row, &joined, &hyper).unwrap();
        let expect = (la * a.len() as f64 + lb * b.len() as f64) / joined.len() as f64;
        prop_assert!((lj - expect).abs() <= 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn scaling_an_inequality_unit_leaves_every_term_unchanged(
        (u, y, negs) in (1usize..6).prop_flat_map(|n| (units(n, 5), prop::collection::vec(-3i64..=3, n), points(n, 1..6))),
        which in any::<prop::sample::Index>(),
        s in 1e-2f64..1e2,
    ) {
        // tied equalities carry their slack in bias units, so only inequalities are scale free
        let u: Vec<_> = u.into_iter().map(|(a, r, o, _)| (a, r, o, false)).collect();
        let n = y.len();
        let poly = poly_from(&u, n);
        let mut scaled = poly.clone();
        let i = which.index(scaled.num_units());
        let h = scaled.units()[i].scaled(s);
        scaled.units_mut()[i] = h;
        let cost: Vec<f64> = (0..n).map(|j| 1.0 + j as f64).collect();
        let hyper = LossHyper::new(0.01, 0.01, 0.5).unwrap();
        let t0 = sample_terms(&poly, &cost, &y, &negs, &hyper).unwrap();
        let t1 = sample_terms(&scaled, &cost, &y, &negs, &hyper).unwrap();
        let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        prop_assert!(same(t0.l_pos, t1.l_pos));
        prop_assert!(same(t0.l_neg.unwrap_or(0.0), t1.l_neg.unwrap_or(0.0)));
        prop_assert!(same(covariance_loss(&poly), covariance_loss(&scaled)));
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        for (d0, d1) in poly.distances(&yf).unwrap().iter().zip(scaled.distances(&yf).unwrap()) {
            prop_assert!(same(*d0, d1));
        }
    }

    #[test]
    fn separated_instances_have_zero_margin_losses_and_gradients(
        seed in any::<u64>(),
        n in 2usize..8,
        m in 1usize..6,
        k in 1usize..10,
        tau in prop::sample::select(vec![1.0, 0.1, 0.01]),
    ) {
        let inst = common::separated(seed, n, m, k, 0.01, 0.01);
        let hyper = LossHyper::new(0.01, 0.01, tau).unwrap();
        prop_assert_eq!(positive_loss(&inst.poly, &inst.y, 0.01).unwrap(), 0.0);
        let cost_row = cost_constraint(&inst.cost, &inst.y).unwrap();
        prop_assert_eq!(negative_loss(&inst.poly, &cost_row, &inst.negatives, &hyper).unwrap(), 0.0);
        let t = sample_terms(&inst.poly, &inst.cost, &inst.y, &inst.negatives, &hyper).unwrap();
        prop_assert_eq!(t.l_pos, 0.0);
        prop_assert_eq!(t.l_neg, Some(0.0));
        prop_assert_eq!(t.grad_pos.max_abs(), 0.0);
        prop_assert_eq!(t.grad_neg.max_abs(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn covariance_pairwise_matches_squared_norm_form(
        (n, m) in (1usize..12, 1usize..=200),
        seed in any::<u64>(),
        scale in 1e-3f64..1e3,
    ) {
        use rand::Rng;
        let mut rng = ilploss::rng::rng_from(seed);
        let mut poly = LearnablePolytope::empty(IntBox::binary(n), 0.05).unwrap();
        for _ in 0..m {
            let a: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
            if a.iter().all(|v| *v == 0.0) {
                continue;
            }
            poly.push_inequality(Hyperplane::with_bias(a, 0.0)).unwrap();
        }
        let diff = covariance_loss_pairwise(&poly) - covariance_loss(&poly);
        prop_assert!(diff.abs() < 1e-9, "m = {}, diff = {diff:e}", poly.num_units());
    }
}
