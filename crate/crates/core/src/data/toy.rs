use std::collections::HashSet;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{solve_rows, Dataset, DatasetMeta, Family, GroundTruth, Sample};
use crate::error::{Error, Result};
use crate::polytope::IntBox;
use crate::rng::{stream_rng, Stream};
use crate::solver::SolveStatus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyCostConfig {
    pub n: usize,
    /// Variables per one-hot group.
    pub group: usize,
    pub train: usize,
    pub test: usize,
    /// Standard deviation of the Gaussian noise added to the inputs.
    pub noise: f64,
    /// Use the identity as the hidden input map instead of a random matrix.
    pub identity_map: bool,
    pub seed: u64,
}

/// One-hot group rows: each consecutive block of `group` variables sums to one.
fn group_equalities(n: usize, group: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = (0..n / group)
        .map(|g| (0..n).map(|j| if j / group == g { 1.0 } else { 0.0 }).collect())
        .collect();
    let len = rows.len();
    (rows, vec![1.0; len])
}

/// A task whose cost must be learned: `x = P(-c) + noise` for a hidden map
/// `P`, with fixed one-hot group constraints. Samples store the true cost.
pub fn gen_toy_cost(cfg: &ToyCostConfig) -> Result<(Dataset, Dataset)> {
    if cfg.group < 2 {
        return Err(Error::invalid(format!("group size must be at least 2, got {}", cfg.group)));
    }
    if cfg.n == 0 || !cfg.n.is_multiple_of(cfg.group) {
        return Err(Error::invalid(format!("n={} is not a positive multiple of the group size {}", cfg.n, cfg.group)));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(Error::invalid("noise must be finite and non-negative"));
    }
    let n = cfg.n;
    let bounds = IntBox::binary(n);
    let (eq_a, eq_b) = group_equalities(n, cfg.group);
    let gt = GroundTruth { a: vec![], b: vec![], m_prime: eq_a.len(), eq_a, eq_b };
    let rows = gt.rows();

    let p: Vec<Vec<f64>> = if cfg.identity_map {
        (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
    } else {
        let mut rng = stream_rng(cfg.seed, Stream::Data, &[0]);
        let scale = 1.0 / (n as f64).sqrt();
        (0..n).map(|_| (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()).collect()
    };

    let draw = |split: u64, i: u64| -> Result<Sample> {
        let mut rng = stream_rng(cfg.seed, Stream::Data, &[1, split, i]);
        let c: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let x: Vec<f64> = p
            .iter()
            .map(|row| {
                let clean: f64 = -row.iter().zip(&c).map(|(pij, cj)| pij * cj).sum::<f64>();
                if cfg.noise > 0.0 {
                    clean + cfg.noise * rng.sample::<f64, _>(StandardNormal)
                } else {
                    clean
                }
            })
            .collect();
        let res = solve_rows(&c, &rows, &bounds)?;
        let z = res.z.filter(|_| res.status == SolveStatus::Optimal).ok_or_else(|| {
            Error::Generation(format!("ground-truth solve for sample {i} ended with {:?}", res.status))
        })?;
        Ok(Sample { x, y_star: z, c: Some(c) })
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
    let meta = DatasetMeta {
        n,
        bounds,
        family: Family::ToyCost,
        ground_truth: Some(gt),
        seed: cfg.seed,
        params: serde_json::to_value(cfg).unwrap_or_default(),
    };
    Ok((Dataset { meta: meta.clone(), samples: train }, Dataset { meta, samples: test }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ToyCostConfig {
        ToyCostConfig { n: 8, group: 4, train: 20, test: 5, noise: 0.0, identity_map: true, seed: 1 }
    }

    #[test]
    fn labels_are_one_hot_per_group_and_pick_the_cheapest() {
        let (train, _) = gen_toy_cost(&cfg()).unwrap();
        train.validate().unwrap();
        for s in &train.samples {
            let c = s.c.as_ref().unwrap();
            for g in 0..2 {
                let block = &s.y_star[4 * g..4 * g + 4];
                assert_eq!(block.iter().sum::<i64>(), 1);
                let pick = block.iter().position(|&v| v == 1).unwrap();
                let cheapest = (0..4).min_by(|&a, &b| c[4 * g + a].total_cmp(&c[4 * g + b])).unwrap();
                assert_eq!(pick, cheapest);
            }
            assert_eq!(s.x, c.iter().map(|v| -v).collect::<Vec<_>>());
        }
    }

    #[test]
    fn degenerate_group_rejected() {
        let mut c = cfg();
        c.group = 1;
        assert!(gen_toy_cost(&c).is_err());
        c.group = 3;
        assert!(gen_toy_cost(&c).is_err());
    }
}
