use std::collections::HashSet;

use ilploss::data::{
    blank_fraction, gen_random_constraints, gen_sudoku, gen_toy_cost, Dataset, RandomConstraintsConfig, Sample,
    SudokuConfig, ToyCostConfig, Variant,
};
use ilploss::linalg::dot_int;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Brute-force optimum of `min c·z` over ground-truth feasible box points,
/// ties to the lexicographically smallest point.
fn brute_force(ds: &Dataset, s: &Sample) -> Option<Vec<i64>> {
    let gt = ds.meta.ground_truth.as_ref().unwrap();
    let b = &ds.meta.bounds;
    let c = s.cost();
    let mut z = b.lo.clone();
    let mut best: Option<(f64, Vec<i64>)> = None;
    loop {
        if gt.is_feasible(&z) {
            let v = dot_int(&c, &z);
            let tol = 1e-9 * v.abs().max(1.0);
            if best.as_ref().is_none_or(|(bv, _)| v < bv - tol) {
                best = Some((v, z.clone()));
            }
        }
        let mut k = z.len();
        loop {
            if k == 0 {
                return best.map(|(_, z)| z);
            }
            k -= 1;
            if z[k] < b.hi[k] {
                z[k] += 1;
                break;
            }
            z[k] = b.lo[k];
        }
    }
}

fn content(s: &Sample) -> (Vec<u64>, Vec<i64>) {
    (s.x.iter().map(|v| v.to_bits()).collect(), s.y_star.clone())
}

fn assert_disjoint(train: &Dataset, test: &Dataset) {
    let seen: HashSet<_> = train.samples.iter().map(content).collect();
    assert!(test.samples.iter().all(|s| !seen.contains(&content(s))), "test sample repeated from training");
}

#[test]
fn random_constraint_labels_are_ground_truth_optima() {
    for (variant, n, m_prime, seed) in [(Variant::Binary, 8, 1, 3), (Variant::Binary, 10, 3, 4), (Variant::Dense, 4, 2, 5), (Variant::Dense, 5, 1, 6)] {
        let (train, test) =
            gen_random_constraints(&RandomConstraintsConfig { n, m_prime, variant, train: 40, test: 20, seed }).unwrap();
        let gt = train.meta.ground_truth.as_ref().unwrap();
        assert_eq!(gt.a.len(), m_prime);
        for a in &gt.a {
            assert!((a.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-12, "normals lie on the unit sphere");
        }
        for ds in [&train, &test] {
            ds.validate().unwrap();
            for s in &ds.samples {
                let c = s.cost();
                assert!((c.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
                assert_eq!(brute_force(ds, s).as_ref(), Some(&s.y_star), "{variant:?} n={n}");
            }
        }
        assert_disjoint(&train, &test);
    }
}

#[test]
fn sudoku_labels_satisfy_the_rules_and_agree_with_givens() {
    let (train, test) = gen_sudoku(&SudokuConfig { k: 4, train: 200, test: 50, seed: 9 }).unwrap();
    let gt = train.meta.ground_truth.as_ref().unwrap();
    for ds in [&train, &test] {
        for s in &ds.samples {
            assert!(gt.is_feasible(&s.y_star));
            // every given is kept, so the label attains the least possible cost -#givens
            let givens = s.x.iter().filter(|v| **v != 0.0).count() as f64;
            assert!((dot_int(&s.cost(), &s.y_star) + givens).abs() < 1e-12);
            let f = blank_fraction(4, &s.x);
            assert!((0.3..=0.7).contains(&f), "blank fraction {f}");
        }
    }
    assert_disjoint(&train, &test);
}

#[test]
fn toy_labels_pick_the_cheapest_item_per_group() {
    let (train, test) =
        gen_toy_cost(&ToyCostConfig { n: 8, group: 4, train: 50, test: 20, noise: 0.0, identity_map: true, seed: 2 }).unwrap();
    for ds in [&train, &test] {
        ds.validate().unwrap();
        for s in &ds.samples {
            assert_eq!(brute_force(ds, s).as_ref(), Some(&s.y_star));
        }
    }
    assert_disjoint(&train, &test);
}

/// Observed blank fractions in 10 equal bins over [0.3, 0.7] against the
/// discrete uniform law of the blank count.
fn mask_chi_square_p(k: usize, samples: &[Sample]) -> f64 {
    let cells = k * k;
    let lo = (3 * cells).div_ceil(10);
    let hi = 7 * cells / 10;
    let bin = |f: f64| (((f - 0.3) / 0.04).floor() as usize).min(9);
    let mut expected = [0.0; 10];
    let per_count = samples.len() as f64 / (hi - lo + 1) as f64;
    for blanks in lo..=hi {
        expected[bin(blanks as f64 / cells as f64)] += per_count;
    }
    let mut observed = [0.0; 10];
    for s in samples {
        observed[bin(blank_fraction(k, &s.x))] += 1.0;
    }
    let mut stat = 0.0;
    let mut bins = 0;
    for (o, e) in observed.iter().zip(&expected) {
        if *e > 0.0 {
            stat += (o - e) * (o - e) / e;
            bins += 1;
        } else {
            assert_eq!(*o, 0.0);
        }
    }
    1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn sudoku_masking_is_uniform() {
    let (train, _) = gen_sudoku(&SudokuConfig { k: 9, train: 400, test: 0, seed: 21 }).unwrap();
    let p = mask_chi_square_p(9, &train.samples);
    assert!(p > 0.01, "9x9 chi-square p = {p}");
    let (train, _) = gen_sudoku(&SudokuConfig { k: 4, train: 2000, test: 0, seed: 22 }).unwrap();
    let p = mask_chi_square_p(4, &train.samples);
    assert!(p > 0.01, "4x4 chi-square p = {p}");
}

#[test]
fn datasets_round_trip_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) =
        gen_random_constraints(&RandomConstraintsConfig { n: 5, m_prime: 2, variant: Variant::Dense, train: 10, test: 2, seed: 1 })
            .unwrap();
    let path = dir.path().join("train.json");
    let cfg = serde_json::json!({ "family": "random_constraints_dense", "seed": 1 });
    ilploss::data::save_dataset(&path, &train, Some(&cfg)).unwrap();
    let back = ilploss::data::load_dataset(&path).unwrap();
    assert_eq!(back, train);
    let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(raw["format_version"], 1);
    assert_eq!(raw["config"], cfg);
}
