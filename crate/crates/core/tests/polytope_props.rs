use ilploss::linalg::dot_int;
use ilploss::polytope::{
    check_feasible, cost_constraint, relax_equalities, Hyperplane, IntBox, LearnablePolytope,
};
use proptest::prelude::*;

fn vec_f(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, n)
}

fn nonzero(n: usize) -> impl Strategy<Value = Vec<f64>> {
    vec_f(n, -2.0, 2.0).prop_filter("normal too small", |a| a.iter().map(|v| v * v).sum::<f64>() > 1e-3)
}

/// Every point of the box in lexicographic order.
fn box_points(b: &IntBox) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for i in 0..b.dim() {
        out = out
            .into_iter()
            .flat_map(|p| {
                (b.lo[i]..=b.hi[i]).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scaling_leaves_distance_unchanged(
        (a, o, z) in (1usize..8).prop_flat_map(|n| (nonzero(n), vec_f(n, -3.0, 3.0), vec_f(n, -5.0, 5.0))),
        r in -3.0f64..3.0,
        s in 1e-3f64..1e3,
    ) {
        let h = Hyperplane::new(a, r, o).unwrap();
        let d = h.signed_distance(&z).unwrap();
        let ds = h.scaled(s).signed_distance(&z).unwrap();
        prop_assert!(close(d, ds), "{d} vs {ds}");

        let bias_scaled = Hyperplane::with_bias(h.a.iter().map(|v| v * s).collect(), h.bias() * s);
        prop_assert!(close(d, bias_scaled.signed_distance(&z).unwrap()));
    }

    #[test]
    fn relaxed_equalities_accept_exactly_the_eps_band(
        (u, v, lo, hi) in (1usize..5, 1usize..3).prop_flat_map(|(n, k)| (
            prop::collection::vec(prop::collection::vec(-2i32..=2, n), k),
            prop::collection::vec(-3i32..=3, k),
            Just(-1i64),
            prop::sample::select(vec![1i64, 2]),
        )),
        eps in prop::sample::select(vec![0.05, 0.5, 1.0, 1.5]),
    ) {
        let u: Vec<Vec<f64>> = u.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
        prop_assume!(u.iter().all(|r| r.iter().any(|v| *v != 0.0)));
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        let n = u[0].len();
        let bounds = IntBox::uniform(lo, hi, n).unwrap();
        prop_assume!(bounds.num_points() <= 4096.0);
        let poly = relax_equalities(&u, &v, eps, bounds.clone()).unwrap();
        prop_assert_eq!(poly.num_rows(), 2 * u.len());
        for z in box_points(&bounds) {
            let inside = u.iter().zip(&v).all(|(row, t)| (dot_int(row, &z) - t).abs() <= eps);
            prop_assert_eq!(check_feasible(&z, &poly, true).unwrap(), inside, "z = {:?}", z);
        }
    }

    #[test]
    fn equality_ties_survive_random_updates(
        n in 1usize..6,
        steps in prop::collection::vec((0usize..100, -1.0f64..1.0), 1..40),
        seed_a in nonzero(5),
    ) {
        let bounds = IntBox::uniform(-2, 2, n).unwrap();
        let mut poly = LearnablePolytope::empty(bounds, 0.05).unwrap();
        poly.push_inequality(Hyperplane::with_bias(seed_a[..n].to_vec(), 0.3)).unwrap();
        poly.push_equality(Hyperplane::with_bias(seed_a[..n].iter().rev().cloned().collect(), -0.7)).unwrap();
        poly.push_equality(Hyperplane::new(vec![1.0; n], 0.2, vec![0.5; n]).unwrap()).unwrap();
        let per = 2 * n + 1;
        for (idx, delta) in steps {
            let k = idx % (poly.num_units() * per);
            let h = &mut poly.units_mut()[k / per];
            match k % per {
                j if j < n => h.a[j] += delta,
                j if j == n => h.r += delta,
                j => h.o[j - n - 1] += delta,
            }
            let rows = poly.rows();
            for (i, j) in poly.eq_pairs() {
                for (x, y) in rows[i].a.iter().zip(&rows[j].a) {
                    prop_assert_eq!(*x, -*y);
                }
                // b_i - eps = -(b_j - eps)
                let eps = poly.epsilon();
                prop_assert!(((rows[i].b - eps) + (rows[j].b - eps)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cost_row_is_tight_at_label_and_negative_on_costlier_points(
        (c, y, zs) in (1usize..7).prop_flat_map(|n| (
            nonzero(n),
            prop::collection::vec(-3i64..=3, n),
            prop::collection::vec(prop::collection::vec(-3i64..=3, n), 1..20),
        )),
    ) {
        let h = cost_constraint(&c, &y).unwrap();
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        prop_assert!(h.signed_distance(&yf).unwrap().abs() < 1e-12);
        let cy = dot_int(&c, &y);
        for z in zs {
            let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
            if dot_int(&c, &z) > cy + 1e-9 {
                prop_assert!(h.signed_distance(&zf).unwrap() < 0.0);
            }
        }
    }
}
