use std::collections::HashSet;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{solve_rows, Dataset, DatasetMeta, Family, GroundTruth, Sample};
use crate::error::{Error, Result};
use crate::polytope::{IntBox, Row};
use crate::rng::{stream_rng, Rng, Stream};
use crate::solver::{SolveStatus, ENUMERATION_BUDGET, FEAS_TOL};

const MAX_TRIES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Box `{0,1}^n`.
    Binary,
    /// Box `[-5,5]^n`.
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomConstraintsConfig {
    pub n: usize,
    pub m_prime: usize,
    pub variant: Variant,
    pub train: usize,
    pub test: usize,
    pub seed: u64,
}

fn unit_vector(n: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if s > 1e-12 {
            return v.into_iter().map(|x| x / s).collect();
        }
    }
}

/// Row through a shifted copy of the box center: the center satisfies it with
/// slack drawn from `U[0, h/2]`, `h` being the largest slack any box point can have.
fn random_row(bounds: &IntBox, rng: &mut Rng) -> Row {
    let n = bounds.dim();
    let a = unit_vector(n, rng);
    let mut at_center = 0.0;
    let mut reach = 0.0;
    for (i, ai) in a.iter().enumerate() {
        let lo = bounds.lo[i] as f64;
        let hi = bounds.hi[i] as f64;
        at_center += ai * 0.5 * (lo + hi);
        reach += ai.abs() * 0.5 * (hi - lo);
    }
    let t = rng.gen::<f64>() * 0.5 * reach;
    Row { a, b: t - at_center }
}

/// True when at least two integer points of the box satisfy `rows`.
fn has_two_points(rows: &[Row], bounds: &IntBox, rng: &mut Rng) -> Result<bool> {
    if bounds.num_points() <= ENUMERATION_BUDGET as f64 {
        let n = bounds.dim();
        let mut z = bounds.lo.clone();
        let mut found = 0;
        loop {
            if rows.iter().all(|r| crate::linalg::dot_int(&r.a, &z) + r.b >= -FEAS_TOL) {
                found += 1;
                if found >= 2 {
                    return Ok(true);
                }
            }
            let mut k = n;
            loop {
                if k == 0 {
                    return Ok(false);
                }
                k -= 1;
                if z[k] < bounds.hi[k] {
                    z[k] += 1;
                    break;
                }
                z[k] = bounds.lo[k];
            }
        }
    }
    // Two opposite objectives with different optima witness two points;
    // coinciding optima are treated as a rejection.
    let c = unit_vector(bounds.dim(), rng);
    let neg: Vec<f64> = c.iter().map(|v| -v).collect();
    let lo = solve_rows(&c, rows, bounds)?;
    let hi = solve_rows(&neg, rows, bounds)?;
    Ok(lo.status == SolveStatus::Optimal && hi.status == SolveStatus::Optimal && lo.z != hi.z)
}

/// Random polyhedron with `m_prime` rows and costs drawn uniformly from the
/// unit sphere; labels are exact optima. Returns `(train, test)`.
pub fn gen_random_constraints(cfg: &RandomConstraintsConfig) -> Result<(Dataset, Dataset)> {
    if cfg.n == 0 || cfg.m_prime == 0 {
        return Err(Error::invalid("n and m_prime must be positive"));
    }
    let (family, bounds) = match cfg.variant {
        Variant::Binary => (Family::RandomConstraintsBinary, IntBox::binary(cfg.n)),
        Variant::Dense => (Family::RandomConstraintsDense, IntBox::uniform(-5, 5, cfg.n)?),
    };
    let mut rng = stream_rng(cfg.seed, Stream::Data, &[0]);
    let mut rows = None;
    for _ in 0..MAX_TRIES {
        let cand: Vec<Row> = (0..cfg.m_prime).map(|_| random_row(&bounds, &mut rng)).collect();
        if has_two_points(&cand, &bounds, &mut rng)? {
            rows = Some(cand);
            break;
        }
    }
    let rows = rows.ok_or_else(|| {
        Error::Generation(format!(
            "no polyhedron with two integer points after {MAX_TRIES} tries (n={}, m'={}, box {:?})",
            cfg.n, cfg.m_prime, cfg.variant
        ))
    })?;
    let gt = GroundTruth {
        a: rows.iter().map(|r| r.a.clone()).collect(),
        b: rows.iter().map(|r| r.b).collect(),
        eq_a: vec![],
        eq_b: vec![],
        m_prime: cfg.m_prime,
    };
    let meta = DatasetMeta {
        n: cfg.n,
        bounds: bounds.clone(),
        family,
        ground_truth: Some(gt),
        seed: cfg.seed,
        params: serde_json::to_value(cfg).unwrap_or_default(),
    };

    let draw = |split: u64, i: u64| -> Result<Sample> {
        let mut rng = stream_rng(cfg.seed, Stream::Data, &[1, split, i]);
        let c = unit_vector(cfg.n, &mut rng);
        let res = solve_rows(&c, &rows, &bounds)?;
        let z = res.z.filter(|_| res.status == SolveStatus::Optimal).ok_or_else(|| {
            Error::Generation(format!("ground-truth solve for sample {i} ended with {:?}", res.status))
        })?;
        Ok(Sample { x: c.iter().map(|v| -v).collect(), y_star: z, c: None })
    };

    let train: Vec<Sample> = (0..cfg.train as u64).map(|i| draw(0, i)).collect::<Result<_>>()?;
    let seen: HashSet<Vec<u64>> = train.iter().map(|s| s.x.iter().map(|v| v.to_bits()).collect()).collect();
    let mut test = Vec::with_capacity(cfg.test);
    let mut i = 0u64;
    while test.len() < cfg.test {
        let s = draw(1, i)?;
        i += 1;
        if !seen.contains(&s.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()) {
            test.push(s);
        }
    }
    Ok((Dataset { meta: meta.clone(), samples: train }, Dataset { meta, samples: test }))
}
