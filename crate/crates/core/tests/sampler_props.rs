mod common;

use std::collections::HashSet;

use common::{khop_exact_on, projection_mean_matches};
use ilploss::polytope::{Hyperplane, IntBox, LearnablePolytope};
use ilploss::sampler::{assemble_negatives, BatchContext, SamplerConfig};
use proptest::prelude::*;

#[test]
fn khop_is_exact_on_every_small_box() {
    for bounds in common::small_boxes() {
        khop_exact_on(&bounds);
    }
}

#[test]
fn projection_rounding_is_unbiased() {
    for (a, bias, y, bounds) in common::projection_cases() {
        projection_mean_matches(a, bias, y, bounds);
    }
}


fn poly_strategy() -> impl Strategy<Value = (LearnablePolytope, Vec<i64>, Vec<Vec<i64>>)> {
    (1usize..6, any::<bool>())
        .prop_flat_map(|(n, binary)| {
            let (lo, hi) = if binary { (0i64, 1i64) } else { (-2, 2) };
            (
                Just(IntBox::uniform(lo, hi, n).unwrap()),
                prop::collection::vec((prop::collection::vec(-1.0f64..1.0, n), -2.0f64..2.0, any::<bool>()), 1..5),
                prop::collection::vec(prop::collection::vec(lo..=hi, n), 2..6),
            )
        })
        .prop_filter_map("zero normal", |(bounds, units, labels)| {
            let mut poly = LearnablePolytope::empty(bounds, 0.05).unwrap();
            for (a, b, eq) in units {
                if a.iter().all(|v| v.abs() < 1e-3) {
                    return None;
                }
                let h = Hyperplane::with_bias(a, b);
                if eq { poly.push_equality(h).unwrap() } else { poly.push_inequality(h).unwrap() }
            }
            let y = labels[0].clone();
            Some((poly, y, labels))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn assembled_negatives_stay_in_box_and_avoid_the_label(
        (poly, y, labels) in poly_strategy(),
        seed in any::<u64>(),
        khop_max in 1usize..5,
    ) {
        let cfg = SamplerConfig { use_khop: true, khop_max, use_projection: true, use_batch: true, seed, ..SamplerConfig::default() };
        let batch = Some(BatchContext { labels: &labels, index: 0 });
        let negs = assemble_negatives(&cfg, &y, &poly, batch, None, 11).unwrap();
        let mut seen = HashSet::new();
        for z in &negs {
            prop_assert!(poly.bounds().contains(z));
            prop_assert!(z != &y);
            prop_assert!(seen.insert(z.clone()), "duplicate negative {:?}", z);
        }
        let again = assemble_negatives(&cfg, &y, &poly, Some(BatchContext { labels: &labels, index: 0 }), None, 11).unwrap();
        prop_assert_eq!(negs, again);
    }
}
