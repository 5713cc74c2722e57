//! Randomized finite-difference audit of the analytic loss gradients.
//!
//! Each trial draws a polytope (inequality and tied equality units), a cost
//! vector, a label and a handful of negatives, then compares every
//! coordinate of the weighted loss gradient with a central difference. The
//! soft-assignment weights and the loss weights are frozen at the base
//! point, matching what the analytic gradient assumes. Coordinates whose
//! perturbation moves a hinge across its kink are skipped.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, to_f64};
use crate::loss::{covariance_loss, ilp_loss_and_grad, soft_assignment, CovStats, Gradients, Lambdas, LossHyper};
use crate::polytope::{Hyperplane, IntBox, LearnablePolytope, NORM_FLOOR};
use crate::rng::{derive_seed, rng_from, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradCheckConfig {
    pub trials: usize,
    pub max_n: usize,
    /// Upper bound on materialized rows.
    pub max_m: usize,
    pub max_negatives: usize,
    pub taus: Vec<f64>,
    pub mu: f64,
    pub step: f64,
    pub tolerance: f64,
    /// Hinge arguments closer than this to zero mark a coordinate as a kink.
    pub kink_eps: f64,
    pub seed: u64,
    /// Flip the sign of the analytic gradient, to prove the audit can fail.
    pub inject_fault: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            max_n: 8,
            max_m: 6,
            max_negatives: 10,
            taus: vec![1.0, 0.1],
            mu: 0.01,
            step: 1e-5,
            tolerance: 1e-4,
            kink_eps: 1e-6,
            seed: 0,
            inject_fault: false,
        }
    }
}

/// The coordinate with the largest relative error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worst {
    pub trial: usize,
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub trials: usize,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_err: f64,
    pub worst: Option<Worst>,
    pub passed: bool,
}

/// Relative error. The denominator is floored at 1e-6 so that coordinates
/// whose true gradient is zero are judged on absolute error.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

struct Trial {
    poly: LearnablePolytope,
    cost: Vec<f64>,
    y: Vec<i64>,
    negatives: Vec<Vec<i64>>,
    hyper: LossHyper,
    stats: CovStats,
}

fn draw_trial(rng: &mut Rng, cfg: &GradCheckConfig, idx: usize) -> Result<Trial> {
    let n = rng.gen_range(1..=cfg.max_n.max(1));
    let bounds = if rng.gen_bool(0.5) { IntBox::binary(n) } else { IntBox::uniform(-2, 2, n)? };
    let mut poly = LearnablePolytope::empty(bounds.clone(), 0.05)?;
    let mut rows_left = rng.gen_range(1..=cfg.max_m.max(1));
    let normal = |rng: &mut Rng| -> Vec<f64> { (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect() };
    while rows_left > 0 {
        let a = normal(rng);
        let o = normal(rng);
        let r = rng.sample::<f64, _>(StandardNormal);
        let h = Hyperplane::new(a, r, o)?;
        if rows_left >= 2 && rng.gen_bool(0.3) {
            poly.push_equality(h)?;
            rows_left -= 2;
        } else {
            poly.push_inequality(h)?;
            rows_left -= 1;
        }
    }
    let point = |rng: &mut Rng| -> Vec<i64> { (0..n).map(|i| rng.gen_range(bounds.lo[i]..=bounds.hi[i])).collect() };
    let y = point(rng);
    let k = rng.gen_range(1..=cfg.max_negatives.max(1));
    let mut negatives = Vec::with_capacity(k);
    for _ in 0..k {
        negatives.push(point(rng));
    }
    let cost = normal(rng);
    let tau = cfg.taus[idx % cfg.taus.len().max(1)];
    let hyper = LossHyper::new(cfg.mu, cfg.mu, tau)?;
    // a short synthetic loss history gives non-uniform weights
    let mut stats = CovStats::new(0);
    let u = Uniform::new(0.1, 2.0);
    for _ in 0..5 {
        stats.observe(u.sample(rng), u.sample(rng), u.sample(rng));
    }
    Ok(Trial { poly, cost, y, negatives, hyper, stats })
}

fn num_params(t: &Trial) -> usize {
    t.poly.num_units() * (2 * t.poly.dim() + 1) + t.cost.len()
}

fn param_mut<'a>(poly: &'a mut LearnablePolytope, cost: &'a mut [f64], idx: usize) -> &'a mut f64 {
    let n = poly.dim();
    let per = 2 * n + 1;
    let units = poly.num_units();
    if idx >= units * per {
        return &mut cost[idx - units * per];
    }
    let h = &mut poly.units_mut()[idx / per];
    let k = idx % per;
    if k < n {
        &mut h.a[k]
    } else if k == n {
        &mut h.r
    } else {
        &mut h.o[k - n - 1]
    }
}

fn flat_grads(g: &Gradients) -> Vec<f64> {
    let mut out = Vec::new();
    for u in &g.units {
        out.extend_from_slice(&u.a);
        out.push(u.r);
        out.extend_from_slice(&u.o);
    }
    out.extend_from_slice(&g.cost);
    out
}

/// Loss with the soft-assignment weights `w` held fixed, plus every hinge argument.
fn frozen_loss(
    poly: &LearnablePolytope,
    cost: &[f64],
    y: &[i64],
    negatives: &[Vec<i64>],
    w: &[Vec<f64>],
    hyper: &LossHyper,
    lambdas: &Lambdas,
) -> Result<(f64, Vec<f64>)> {
    let yf = to_f64(y);
    let mut args = Vec::new();
    let d_pos = poly.distances(&yf)?;
    let m = d_pos.len();
    let mut l_pos = 0.0;
    for d in &d_pos {
        let h = hyper.mu_pos - d;
        args.push(h);
        l_pos += h.max(0.0) / m as f64;
    }
    let cn = norm2(cost).max(NORM_FLOOR);
    let mut l_neg = 0.0;
    for (z, wz) in negatives.iter().zip(w) {
        let zf = to_f64(z);
        let mut d = poly.distances(&zf)?;
        d.push((dot(cost, &yf) - dot(cost, &zf)) / cn);
        for (di, wi) in d.iter().zip(wz) {
            let h = hyper.mu_neg + di;
            args.push(h);
            l_neg += wi * h.max(0.0);
        }
    }
    if !negatives.is_empty() {
        l_neg /= negatives.len() as f64;
    }
    let total = lambdas.pos * l_pos + lambdas.neg * l_neg + lambdas.cov * covariance_loss(poly);
    Ok((total, args))
}

/// Runs the audit. Returns an error only for internal failures; a gradient
/// mismatch is reported through `passed`.
pub fn run_gradcheck(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    if cfg.taus.is_empty() || !(cfg.step > 0.0) {
        return Err(Error::Config("gradient check needs at least one temperature and a positive step".into()));
    }
    let mut report = GradCheckReport { trials: cfg.trials, checked: 0, skipped: 0, max_rel_err: 0.0, worst: None, passed: true };
    for trial in 0..cfg.trials {
        let mut rng = rng_from(derive_seed(cfg.seed, &[trial as u64]));
        let t = draw_trial(&mut rng, cfg, trial)?;
        let negatives: Vec<Vec<i64>> = t.negatives.iter().filter(|z| **z != t.y).cloned().collect();
        let rep = ilp_loss_and_grad(&t.poly, &t.cost, &t.y, &negatives, &t.hyper, &t.stats)?;
        let mut analytic = flat_grads(&rep.grads);
        if cfg.inject_fault {
            analytic.iter_mut().for_each(|g| *g = -*g);
        }

        let yf = to_f64(&t.y);
        let cn = norm2(&t.cost).max(NORM_FLOOR);
        let mut w = Vec::with_capacity(negatives.len());
        for z in &negatives {
            let zf = to_f64(z);
            let mut d = t.poly.distances(&zf)?;
            d.push((dot(&t.cost, &yf) - dot(&t.cost, &zf)) / cn);
            w.push(soft_assignment(&d, t.hyper.tau)?);
        }
        let (_, base_args) = frozen_loss(&t.poly, &t.cost, &t.y, &negatives, &w, &t.hyper, &rep.lambdas)?;

        for (coord, &ga) in analytic.iter().enumerate().take(num_params(&t)) {
            let eval = |delta: f64| -> Result<(f64, Vec<f64>)> {
                let mut poly = t.poly.clone();
                let mut cost = t.cost.clone();
                *param_mut(&mut poly, &mut cost, coord) += delta;
                frozen_loss(&poly, &cost, &t.y, &negatives, &w, &t.hyper, &rep.lambdas)
            };
            let (fp, args_p) = eval(cfg.step)?;
            let (fm, args_m) = eval(-cfg.step)?;
            let kink = base_args
                .iter()
                .zip(&args_p)
                .zip(&args_m)
                .any(|((b, p), m)| b.abs() < cfg.kink_eps || (p > &0.0) != (m > &0.0));
            if kink {
                report.skipped += 1;
                continue;
            }
            let gn = (fp - fm) / (2.0 * cfg.step);
            let err = rel_err(ga, gn);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some(Worst { trial, coord, analytic: ga, numeric: gn, rel_err: err });
            }
        }
    }
    report.passed = report.checked > 0 && report.max_rel_err < cfg.tolerance;
    Ok(report)
}
