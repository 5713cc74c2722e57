//! Negative samples: integer points that must be cut off by some row or be
//! more expensive than the label.
//!
//! Four sources are available: k-hop neighbours of the label, rounded
//! projections of the label onto each learnable row, the labels of the other
//! samples in a minibatch, and the optimum of the currently learned ILP.

use std::collections::HashSet;

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::polytope::{IntBox, LearnablePolytope};
use crate::rng::{derive_seed, rng_from, Rng};
use crate::solver::{solve_bnb, solve_exhaustive, Backend, IlpInstance, SolveStatus};

/// Random restarts allowed per k-hop point before giving up on it.
const KHOP_TRIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub use_khop: bool,
    /// Largest hop distance; hops `1..=khop_max` are sampled.
    pub khop_max: usize,
    /// Points per hop; `None` means the dimension `n`.
    pub khop_per_hop: Option<usize>,
    pub use_projection: bool,
    pub use_batch: bool,
    pub use_solver: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            use_khop: true,
            khop_max: 4,
            khop_per_hop: None,
            use_projection: false,
            use_batch: false,
            use_solver: false,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.use_khop || self.use_projection || self.use_batch || self.use_solver) {
            return Err(Error::Config("every negative sampling strategy is disabled".into()));
        }
        if self.use_khop && self.khop_max == 0 {
            return Err(Error::Config("khop_max must be at least 1".into()));
        }
        Ok(())
    }
}

fn l1(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// In-box points at L1 distance exactly `k` from `y_star`.
///
/// For `k = 1` all neighbours are listed (a random subset of `budget` of them
/// if there are more). For larger `k`, up to `budget` distinct points are drawn
/// by taking `k` random in-box unit steps and rejecting walks that end at the
/// wrong distance.
pub fn khop_negatives(y_star: &[i64], k: usize, budget: usize, bounds: &IntBox, seed: u64) -> Result<Vec<Vec<i64>>> {
    check_dim(bounds.dim(), y_star.len())?;
    if k == 0 {
        return Err(Error::invalid("hop distance must be at least 1"));
    }
    if !bounds.contains(y_star) {
        return Err(Error::invalid("label lies outside the box"));
    }
    let n = y_star.len();
    let mut rng = rng_from(seed);
    if k == 1 {
        let mut all = Vec::new();
        for i in 0..n {
            for step in [-1, 1] {
                let v = y_star[i] + step;
                if (bounds.lo[i]..=bounds.hi[i]).contains(&v) {
                    let mut z = y_star.to_vec();
                    z[i] = v;
                    all.push(z);
                }
            }
        }
        if all.len() <= budget {
            return Ok(all);
        }
        let mut keep = sample_indices(&mut rng, all.len(), budget).into_vec();
        keep.sort_unstable();
        return Ok(keep.into_iter().map(|i| all[i].clone()).collect());
    }

    let movable: Vec<usize> = (0..n).filter(|&i| bounds.lo[i] < bounds.hi[i]).collect();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    if movable.is_empty() {
        return Ok(out);
    }
    'points: while out.len() < budget {
        for _ in 0..KHOP_TRIES {
            let mut z = y_star.to_vec();
            for _ in 0..k {
                let i = movable[rng.gen_range(0..movable.len())];
                let up = if z[i] == bounds.lo[i] {
                    true
                } else if z[i] == bounds.hi[i] {
                    false
                } else {
                    rng.gen_bool(0.5)
                };
                z[i] += if up { 1 } else { -1 };
            }
            if l1(&z, y_star) == k as i64 && seen.insert(z.clone()) {
                out.push(z);
                continue 'points;
            }
        }
        break;
    }
    Ok(out)
}

/// Rounds `v` down or up with probabilities `ceil(v) - v` and `v - floor(v)`.
pub fn round_probabilistic(v: f64, rng: &mut Rng) -> i64 {
    let lo = v.floor();
    let frac = v - lo;
    if frac > 0.0 && rng.gen::<f64>() < frac {
        lo as i64 + 1
    } else {
        lo as i64
    }
}

/// Orthogonal projection of `y_star` onto every learnable row, rounded
/// probabilistically and clamped into the box. Candidates equal to `y_star`
/// are dropped.
pub fn project_and_sample(y_star: &[i64], poly: &LearnablePolytope, seed: u64) -> Result<Vec<Vec<i64>>> {
    check_dim(poly.dim(), y_star.len())?;
    let mut rng = rng_from(seed);
    let y: Vec<f64> = y_star.iter().map(|&v| v as f64).collect();
    let bounds = poly.bounds();
    let mut out = Vec::new();
    for row in poly.rows() {
        let s = crate::polytope::floored_norm(&row.a);
        let d = row.signed_distance(&y);
        if !d.is_finite() {
            return Err(Error::numeric(None, "non-finite distance during projection"));
        }
        let z: Vec<i64> = y
            .iter()
            .zip(&row.a)
            .enumerate()
            .map(|(i, (yi, ai))| bounds.clamp(i, round_probabilistic(yi - d * ai / s, &mut rng)))
            .collect();
        if z != y_star {
            out.push(z);
        }
    }
    Ok(out)
}

/// Labels of the other batch members that differ from the label at `index`.
pub fn batch_negatives(labels: &[Vec<i64>], index: usize) -> Vec<Vec<i64>> {
    let Some(own) = labels.get(index) else {
        return Vec::new();
    };
    let mut seen = HashSet::new();
    labels
        .iter()
        .enumerate()
        .filter(|(j, z)| *j != index && *z != own)
        .filter(|(_, z)| seen.insert((*z).clone()))
        .map(|(_, z)| z.clone())
        .collect()
}

/// The optimum of the current learned ILP if it differs from the label.
/// Timeouts and infeasible models yield no negative.
pub fn solver_negatives(instance: &IlpInstance, backend: &Backend, y_star: &[i64]) -> Result<Vec<Vec<i64>>> {
    let res = match backend {
        Backend::Exhaustive => solve_exhaustive(instance)?,
        Backend::Bnb(opts) => solve_bnb(instance, None, opts)?,
        Backend::External(ext) => ext.solve(instance)?,
    };
    match res.status {
        SolveStatus::Optimal => Ok(res.z.into_iter().filter(|z| z != y_star).collect()),
        SolveStatus::Timeout => {
            log::warn!("solver negative skipped: solve timed out");
            Ok(Vec::new())
        }
        SolveStatus::Infeasible => {
            log::warn!("solver negative skipped: learned constraints are infeasible");
            Ok(Vec::new())
        }
    }
}

/// Minibatch labels plus the position of the current sample among them.
#[derive(Debug, Clone, Copy)]
pub struct BatchContext<'a> {
    pub labels: &'a [Vec<i64>],
    pub index: usize,
}

/// Current learned instance for this sample and how to solve it.
#[derive(Debug, Clone, Copy)]
pub struct SolverContext<'a> {
    pub instance: &'a IlpInstance,
    pub backend: &'a Backend,
}

/// Union of the enabled strategies, deduplicated in order of discovery,
/// restricted to the box and excluding `y_star`. `seed` individualizes the
/// draw (for example per sample and epoch) on top of `cfg.seed`.
pub fn assemble_negatives(
    cfg: &SamplerConfig,
    y_star: &[i64],
    poly: &LearnablePolytope,
    batch: Option<BatchContext<'_>>,
    solver: Option<SolverContext<'_>>,
    seed: u64,
) -> Result<Vec<Vec<i64>>> {
    cfg.validate()?;
    check_dim(poly.dim(), y_star.len())?;
    let bounds = poly.bounds();
    let base = derive_seed(cfg.seed, &[seed]);
    let mut found: Vec<Vec<i64>> = Vec::new();
    if cfg.use_khop {
        let budget = cfg.khop_per_hop.unwrap_or(poly.dim());
        for k in 1..=cfg.khop_max {
            found.extend(khop_negatives(y_star, k, budget, bounds, derive_seed(base, &[1, k as u64]))?);
        }
    }
    if cfg.use_projection {
        found.extend(project_and_sample(y_star, poly, derive_seed(base, &[2]))?);
    }
    if cfg.use_batch {
        if let Some(b) = batch {
            found.extend(batch_negatives(b.labels, b.index));
        }
    }
    if cfg.use_solver {
        if let Some(s) = solver {
            found.extend(solver_negatives(s.instance, s.backend, y_star)?);
        }
    }
    let mut seen = HashSet::new();
    Ok(found.into_iter().filter(|z| z != y_star && bounds.contains(z) && seen.insert(z.clone())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::Hyperplane;
    use crate::solver::BnbOptions;

    fn sorted(mut v: Vec<Vec<i64>>) -> Vec<Vec<i64>> {
        v.sort();
        v
    }

    #[test]
    fn khop_examples() {
        let b = IntBox::binary(2);
        assert_eq!(sorted(khop_negatives(&[0, 1], 1, 10, &b, 0).unwrap()), vec![vec![0, 0], vec![1, 1]]);
        assert_eq!(khop_negatives(&[0, 1], 2, 10, &b, 0).unwrap(), vec![vec![1, 0]]);
        let b = IntBox::uniform(0, 2, 2).unwrap();
        assert_eq!(
            sorted(khop_negatives(&[1, 1], 1, 10, &b, 0).unwrap()),
            vec![vec![0, 1], vec![1, 0], vec![1, 2], vec![2, 1]]
        );
        assert!(khop_negatives(&[0], 2, 5, &IntBox::binary(1), 0).unwrap().is_empty());
    }

    #[test]
    fn khop_respects_budget() {
        let b = IntBox::binary(10);
        assert_eq!(khop_negatives(&[0; 10], 1, 4, &b, 3).unwrap().len(), 4);
        let far = khop_negatives(&[0; 10], 3, 7, &b, 3).unwrap();
        assert_eq!(far.len(), 7);
        assert!(far.iter().all(|z| l1(z, &[0; 10]) == 3));
    }

    #[test]
    fn projection_examples() {
        let bounds = IntBox::uniform(-3, 3, 2).unwrap();
        let mut p = LearnablePolytope::empty(bounds.clone(), 0.05).unwrap();
        p.push_inequality(Hyperplane::with_bias(vec![1.0, 1.0], -1.0)).unwrap();
        let mut counts = [0usize; 2];
        for seed in 0..400 {
            for z in project_and_sample(&[0, 0], &p, seed).unwrap() {
                assert!(z.iter().all(|v| *v == 0 || *v == 1));
                counts[0] += z[0] as usize;
                counts[1] += z[1] as usize;
            }
        }
        assert!(counts.iter().all(|&c| c > 150 && c < 250), "{counts:?}");

        // lands exactly on an integer point
        let mut p = LearnablePolytope::empty(bounds.clone(), 0.05).unwrap();
        p.push_inequality(Hyperplane::with_bias(vec![1.0, 0.0], -2.0)).unwrap();
        assert_eq!(project_and_sample(&[0, 1], &p, 9).unwrap(), vec![vec![2, 1]]);

        // label already on the hyperplane
        let mut p = LearnablePolytope::empty(bounds, 0.05).unwrap();
        p.push_inequality(Hyperplane::with_bias(vec![0.0, 1.0], -1.0)).unwrap();
        assert!(project_and_sample(&[2, 1], &p, 9).unwrap().is_empty());
    }

    #[test]
    fn batch_examples() {
        let labels = vec![vec![0, 1], vec![1, 0], vec![1, 1]];
        assert_eq!(batch_negatives(&labels, 0), vec![vec![1, 0], vec![1, 1]]);
        let labels = vec![vec![0, 1], vec![0, 1], vec![1, 1]];
        assert_eq!(batch_negatives(&labels, 0), vec![vec![1, 1]]);
        assert!(batch_negatives(&labels[..1], 0).is_empty());
    }

    #[test]
    fn solver_negative_from_unconstrained_box() {
        let inst = IlpInstance::new(vec![1.0, 1.0], vec![], vec![], IntBox::binary(2)).unwrap();
        assert_eq!(solver_negatives(&inst, &Backend::Exhaustive, &[0, 1]).unwrap(), vec![vec![0, 0]]);
        assert!(solver_negatives(&inst, &Backend::Exhaustive, &[0, 0]).unwrap().is_empty());
        let infeasible = IlpInstance::new(vec![1.0], vec![vec![1.0]], vec![-2.0], IntBox::binary(1)).unwrap();
        assert!(solver_negatives(&infeasible, &Backend::Bnb(BnbOptions::default()), &[0]).unwrap().is_empty());
    }

    #[test]
    fn assemble_budget_and_errors() {
        let n = 8;
        let p = LearnablePolytope::empty(IntBox::binary(n), 0.05).unwrap();
        let cfg = SamplerConfig::default();
        let y = vec![0, 1, 0, 1, 1, 0, 0, 1];
        let negs = assemble_negatives(&cfg, &y, &p, None, None, 5).unwrap();
        assert!(negs.len() <= 4 * n);
        assert_eq!(negs, assemble_negatives(&cfg, &y, &p, None, None, 5).unwrap());
        let off = SamplerConfig { use_khop: false, ..SamplerConfig::default() };
        assert!(matches!(assemble_negatives(&off, &y, &p, None, None, 5), Err(Error::Config(_))));
    }
}
