#![allow(dead_code)]

use std::collections::HashSet;

use ilploss::linalg::{dot, norm2};
use ilploss::polytope::{Hyperplane, IntBox, LearnablePolytope};
use ilploss::rng::rng_from;
use ilploss::sampler::{khop_negatives, project_and_sample};
use ilploss::train::LogRecord;
use rand::Rng;
use rand_distr::StandardNormal;

/// A polytope, label, cost and negatives where `y*` clears every row by at
/// least `mu_pos` and every negative is cut by every row and by the cost row
/// with at least `mu_neg` to spare.
pub struct Separated {
    pub poly: LearnablePolytope,
    pub cost: Vec<f64>,
    pub y: Vec<i64>,
    pub negatives: Vec<Vec<i64>>,
}

pub fn separated(seed: u64, n: usize, m: usize, negs: usize, mu_pos: f64, mu_neg: f64) -> Separated {
    let mut rng = rng_from(seed);
    let gauss = |rng: &mut ilploss::rng::Rng| -> Vec<f64> { (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect() };
    let delta: Vec<i64> = loop {
        let d: Vec<i64> = (0..n).map(|_| rng.gen_range(-3..=3)).collect();
        if d.iter().any(|v| *v != 0) {
            break d;
        }
    };
    let df: Vec<f64> = delta.iter().map(|&v| v as f64).collect();
    let dn = norm2(&df);
    let y: Vec<i64> = (0..n).map(|_| rng.gen_range(-5..=5)).collect();
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();

    let mut poly = LearnablePolytope::empty(IntBox::uniform(-1000, 1000, n).unwrap(), 0.05).unwrap();
    // steepest approach of the walk y* + k*delta to any row, per unit of k
    let mut rate = f64::INFINITY;
    let mut need = 0.0f64;
    while poly.num_units() < m {
        let g = gauss(&mut rng);
        let a: Vec<f64> = df.iter().zip(&g).map(|(d, g)| -d / dn + 0.4 * g / (n as f64).sqrt()).collect();
        let an = norm2(&a);
        let along = -dot(&a, &df) / an;
        if along < 0.2 {
            continue;
        }
        let o = gauss(&mut rng);
        let clearance = mu_pos + rng.gen_range(0.0..2.0);
        let bias = clearance * an - dot(&a, &yf);
        let r = bias + dot(&o, &a) / an;
        poly.push_inequality(Hyperplane::new(a, r, o).unwrap()).unwrap();
        rate = rate.min(along);
        need = need.max(clearance + mu_neg);
    }
    let cost: Vec<f64> = loop {
        let g = gauss(&mut rng);
        let c: Vec<f64> = df.iter().zip(&g).map(|(d, g)| d / dn + 0.3 * g / (n as f64).sqrt()).collect();
        if dot(&c, &df) / norm2(&c) > 0.2 {
            break c;
        }
    };
    let cost_rate = dot(&cost, &df) / norm2(&cost);
    let k0 = (need / rate).max(mu_neg / cost_rate).ceil() as i64 + 1;
    let negatives = (0..negs as i64)
        .map(|j| y.iter().zip(&delta).map(|(yi, di)| yi + (k0 + j) * di).collect())
        .collect();
    Separated { poly, cost, y, negatives }
}

pub fn all_points(b: &IntBox) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for i in 0..b.dim() {
        out = out
            .into_iter()
            .flat_map(|p: Vec<i64>| {
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

pub fn l1(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn small_boxes() -> Vec<IntBox> {
    vec![IntBox::binary(3), IntBox::binary(4), IntBox::uniform(-1, 1, 3).unwrap(), IntBox::new(vec![0, -2], vec![2, 1]).unwrap()]
}

/// Every k-hop draw from every point of the box lies in the box at exactly
/// distance k, without duplicates; the 1-hop ring comes back complete.
pub fn khop_exact_on(bounds: &IntBox) {
    let pts = all_points(bounds);
    for y in &pts {
        for k in 1..=4usize {
            let ring: HashSet<Vec<i64>> = pts.iter().filter(|z| l1(z, y) == k as i64).cloned().collect();
            let got = khop_negatives(y, k, 1000, bounds, 7 + k as u64).unwrap();
            let set: HashSet<Vec<i64>> = got.iter().cloned().collect();
            assert_eq!(set.len(), got.len(), "duplicates for y={y:?} k={k}");
            for z in &got {
                assert!(bounds.contains(z));
                assert_eq!(l1(z, y), k as i64);
            }
            assert!(set.is_subset(&ring));
            if k == 1 {
                assert_eq!(set, ring, "1-hop ring must be complete");
            }
            let capped = khop_negatives(y, k, 2, bounds, 3).unwrap();
            assert!(capped.len() <= 2);
            assert!(capped.iter().all(|z| ring.contains(z)));
        }
    }
}

/// Row `(a, bias)`, label and box for the projection checks.
pub fn projection_cases() -> Vec<(Vec<f64>, f64, Vec<i64>, IntBox)> {
    vec![
        // y* violates the row: projection moves it inward by more than one unit in the first coordinate
        (vec![1.0, 0.3, -0.2], -2.6, vec![0, 1, 2], IntBox::uniform(-5, 5, 3).unwrap()),
        // y* is inside; the projection moves it back onto the boundary
        (vec![-1.0, 0.5, 1.5, 0.25], 0.7, vec![3, -1, 4, 0], IntBox::uniform(-5, 5, 4).unwrap()),
        // the projection leaves the box in the second coordinate and is clamped there
        (vec![0.6, 0.8], 4.1, vec![-2, -2], IntBox::uniform(-3, 3, 2).unwrap()),
    ]
}

/// Coordinatewise mean of the rounded projection over 10^4 seeds against the
/// clamped real projection, with a 3-sigma band per coordinate.
pub fn projection_mean_matches(a: Vec<f64>, bias: f64, y: Vec<i64>, bounds: IntBox) {
    let n = y.len();
    let mut poly = LearnablePolytope::empty(bounds.clone(), 0.05).unwrap();
    poly.push_inequality(Hyperplane::with_bias(a.clone(), bias)).unwrap();
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let s = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let d = (a.iter().zip(&yf).map(|(x, z)| x * z).sum::<f64>() + bias) / s;
    let target: Vec<f64> = (0..n)
        .map(|i| (yf[i] - d * a[i] / s).clamp(bounds.lo[i] as f64, bounds.hi[i] as f64))
        .collect();
    let draws = 10_000;
    let mut sum = vec![0.0; n];
    for seed in 0..draws {
        let out = project_and_sample(&y, &poly, seed).unwrap();
        assert_eq!(out.len(), 1, "projection must never round back to y*");
        assert!(bounds.contains(&out[0]));
        for (acc, v) in sum.iter_mut().zip(&out[0]) {
            *acc += *v as f64;
        }
    }
    for i in 0..n {
        let mean = sum[i] / draws as f64;
        let frac = target[i] - target[i].floor();
        let sigma = (frac * (1.0 - frac) / draws as f64).sqrt();
        assert!((mean - target[i]).abs() <= 3.0 * sigma + 1e-12, "coordinate {i}: mean {mean}, expected {} (3 sigma {})", target[i], 3.0 * sigma);
    }
}

/// Log as JSON with the wall-clock field removed.
pub fn strip_elapsed(log: &[LogRecord]) -> String {
    let mut v = serde_json::to_value(log).unwrap();
    for rec in v.as_array_mut().unwrap() {
        rec.as_object_mut().unwrap().remove("elapsed_s");
    }
    serde_json::to_string(&v).unwrap()
}
