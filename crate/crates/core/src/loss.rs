//! Margin losses over the learnable rows, the temperature-annealed soft
//! assignment of negatives to rows, the covariance regularizer, CoV loss
//! weighting and the analytic gradients of all of them.
//!
//! Every row `i` is treated as a linear classifier with score
//! `d_i(z) = (a_i·z + b_i)/|a_i|`. The ground truth must score at least
//! `mu_pos` on every learnable row; each negative must score at most
//! `-mu_neg` on at least one row, where the cost row `c·z <= c·y*` also
//! takes part.
//!
//! Soft-assignment weights and the CoV weights are constants as far as the
//! gradient is concerned. Hinges have zero subgradient at the kink.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, dot, norm2, to_f64};
use crate::polytope::{Hyperplane, LearnablePolytope, RowView, NORM_FLOOR};

/// Smallest temperature used by the soft assignment.
pub const TAU_FLOOR: f64 = 1e-6;

/// Default number of steps with uniform loss weights.
pub const DEFAULT_WARMUP: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossHyper {
    pub mu_pos: f64,
    pub mu_neg: f64,
    pub tau: f64,
}

impl LossHyper {
    pub fn new(mu_pos: f64, mu_neg: f64, tau: f64) -> Result<Self> {
        let h = Self { mu_pos, mu_neg, tau };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_pos > 0.0 && self.mu_neg > 0.0) {
            return Err(Error::invalid("margins must be positive"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid(format!("temperature must be positive, got {}", self.tau)));
        }
        Ok(())
    }
}

impl Default for LossHyper {
    fn default() -> Self {
        Self { mu_pos: 0.01, mu_neg: 0.01, tau: 1.0 }
    }
}

/// Gradient of one stored hyperplane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitGrad {
    pub a: Vec<f64>,
    pub r: f64,
    pub o: Vec<f64>,
}

/// Gradient bundle with the same layout as the learnable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub units: Vec<UnitGrad>,
    pub cost: Vec<f64>,
}

impl Gradients {
    pub fn zeros(num_units: usize, n: usize) -> Self {
        Self {
            units: (0..num_units).map(|_| UnitGrad { a: vec![0.0; n], r: 0.0, o: vec![0.0; n] }).collect(),
            cost: vec![0.0; n],
        }
    }

    pub fn zeros_like(poly: &LearnablePolytope) -> Self {
        Self::zeros(poly.num_units(), poly.dim())
    }

    pub fn add_scaled(&mut self, other: &Gradients, alpha: f64) {
        for (u, v) in self.units.iter_mut().zip(&other.units) {
            axpy(alpha, &v.a, &mut u.a);
            u.r += alpha * v.r;
            axpy(alpha, &v.o, &mut u.o);
        }
        axpy(alpha, &other.cost, &mut self.cost);
    }

    pub fn scale(&mut self, alpha: f64) {
        for u in &mut self.units {
            u.a.iter_mut().chain(u.o.iter_mut()).for_each(|v| *v *= alpha);
            u.r *= alpha;
        }
        self.cost.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Squared Euclidean norm over the constraint parameters only.
    pub fn constraint_norm_sq(&self) -> f64 {
        self.units.iter().map(|u| dot(&u.a, &u.a) + u.r * u.r + dot(&u.o, &u.o)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.units
            .iter()
            .flat_map(|u| u.a.iter().chain(std::iter::once(&u.r)).chain(&u.o))
            .chain(&self.cost)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Index of the first unit with a non-finite entry; `Some(num_units)` flags the cost.
    pub fn first_non_finite(&self) -> Option<usize> {
        for (i, u) in self.units.iter().enumerate() {
            if !(u.r.is_finite() && u.a.iter().chain(&u.o).all(|v| v.is_finite())) {
                return Some(i);
            }
        }
        if !self.cost.iter().all(|v| v.is_finite()) {
            return Some(self.units.len());
        }
        None
    }
}

/// Loss-term weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambdas {
    pub pos: f64,
    pub neg: f64,
    pub cov: f64,
}

impl Lambdas {
    pub const UNIFORM: Lambdas = Lambdas { pos: 1.0 / 3.0, neg: 1.0 / 3.0, cov: 1.0 / 3.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_pos: f64,
    pub l_neg: f64,
    pub l_cov: f64,
    pub lambdas: Lambdas,
    pub grads: Gradients,
}

impl LossReport {
    pub fn total(&self) -> f64 {
        self.lambdas.pos * self.l_pos + self.lambdas.neg * self.l_neg + self.lambdas.cov * self.l_cov
    }
}

/// Running mean and variance (Welford) of one scalar series.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    /// Coefficient of variation `std / max(|mean|, 1e-8)`.
    pub fn cv(&self) -> f64 {
        self.variance().sqrt() / self.mean.abs().max(1e-8)
    }
}

/// Loss history used to weight the three terms by their coefficient of variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovStats {
    pub pos: Welford,
    pub neg: Welford,
    pub cov: Welford,
    pub steps: u64,
    pub warmup: u64,
}

impl Default for CovStats {
    fn default() -> Self {
        Self::new(DEFAULT_WARMUP)
    }
}

impl CovStats {
    pub fn new(warmup: u64) -> Self {
        Self { pos: Welford::default(), neg: Welford::default(), cov: Welford::default(), steps: 0, warmup }
    }

    pub fn observe(&mut self, l_pos: f64, l_neg: f64, l_cov: f64) {
        self.pos.push(l_pos);
        self.neg.push(l_neg);
        self.cov.push(l_cov);
        self.steps += 1;
    }
}

/// `lambda_i = cv_i / sum_j cv_j`, uniform during warmup or when no term varies.
pub fn cov_weights(stats: &CovStats) -> Lambdas {
    if stats.steps <= stats.warmup {
        return Lambdas::UNIFORM;
    }
    let cv = [stats.pos.cv(), stats.neg.cv(), stats.cov.cv()];
    let total: f64 = cv.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Lambdas::UNIFORM;
    }
    Lambdas { pos: cv[0] / total, neg: cv[1] / total, cov: cv[2] / total }
}

/// `w_i = exp(-d_i/tau) / sum_j exp(-d_j/tau)`, computed with a max shift.
pub fn soft_assignment(distances: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("temperature must be positive, got {tau}")));
    }
    let mut w = Vec::with_capacity(distances.len());
    soft_assignment_into(distances, tau, &mut w);
    Ok(w)
}

fn soft_assignment_into(distances: &[f64], tau: f64, out: &mut Vec<f64>) {
    let tau = tau.max(TAU_FLOOR);
    out.clear();
    let shift = distances.iter().fold(f64::INFINITY, |m, &d| m.min(d));
    let mut total = 0.0;
    for &d in distances {
        let e = (-(d - shift) / tau).exp();
        total += e;
        out.push(e);
    }
    out.iter_mut().for_each(|v| *v /= total);
}

/// Per-unit quantities needed to evaluate rows and their derivatives.
struct UnitGeom {
    s: f64,
    floored: bool,
    p: f64,
    bias: f64,
}

impl UnitGeom {
    fn of(h: &Hyperplane) -> Self {
        let raw = norm2(&h.a);
        let floored = raw < NORM_FLOOR;
        let s = raw.max(NORM_FLOOR);
        let p = dot(&h.o, &h.a);
        Self { s, floored, p, bias: h.r - p / s }
    }
}

/// Accumulates `sum coef * d d_row / d theta` for every row of one unit.
#[derive(Clone)]
struct UnitAcc {
    z: Vec<f64>,
    c: f64,
    d: f64,
}

/// Precomputed evaluator for one polytope and cost vector.
struct Evaluator<'a> {
    poly: &'a LearnablePolytope,
    views: Vec<RowView>,
    geom: Vec<UnitGeom>,
    cost: &'a [f64],
    cost_norm: f64,
    cost_floored: bool,
}

impl<'a> Evaluator<'a> {
    fn new(poly: &'a LearnablePolytope, cost: &'a [f64]) -> Result<Self> {
        check_dim(poly.dim(), cost.len())?;
        let geom: Vec<UnitGeom> = poly.units().iter().map(UnitGeom::of).collect();
        for (i, g) in geom.iter().enumerate() {
            if !g.bias.is_finite() || !g.s.is_finite() {
                return Err(Error::numeric(Some(i), "non-finite hyperplane"));
            }
        }
        let raw = norm2(cost);
        if !raw.is_finite() {
            return Err(Error::numeric(Some(poly.num_units()), "non-finite cost"));
        }
        Ok(Self {
            poly,
            views: poly.row_views(),
            geom,
            cost,
            cost_norm: raw.max(NORM_FLOOR),
            cost_floored: raw < NORM_FLOOR,
        })
    }

    fn m(&self) -> usize {
        self.views.len()
    }

    /// Learnable row distances at `z`, written into `out`.
    fn row_distances(&self, z: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let units = self.poly.units();
        let raw: Vec<f64> = units.iter().zip(&self.geom).map(|(h, g)| dot(&h.a, z) + g.bias).collect();
        for v in &self.views {
            let g = &self.geom[v.unit];
            out.push((v.sign * raw[v.unit] + v.slack) / g.s);
        }
    }

    fn cost_distance(&self, y_star: &[f64], z: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((c, y), zi) in self.cost.iter().zip(y_star).zip(z) {
            acc += c * (y - zi);
        }
        acc / self.cost_norm
    }

    fn new_accs(&self) -> Vec<UnitAcc> {
        vec![UnitAcc { z: vec![0.0; self.poly.dim()], c: 0.0, d: 0.0 }; self.poly.num_units()]
    }

    fn accumulate(&self, accs: &mut [UnitAcc], row: usize, coef: f64, d: f64, z: &[f64]) {
        let v = self.views[row];
        let acc = &mut accs[v.unit];
        axpy(coef * v.sign, z, &mut acc.z);
        acc.c += coef * v.sign;
        acc.d += coef * d;
    }

    fn finish(&self, accs: &[UnitAcc], grads: &mut Gradients) {
        for ((acc, g), (h, out)) in accs.iter().zip(&self.geom).zip(self.poly.units().iter().zip(&mut grads.units)) {
            if acc.c == 0.0 && acc.d == 0.0 && acc.z.iter().all(|v| *v == 0.0) {
                continue;
            }
            let s = g.s;
            let s2 = s * s;
            let nf = if g.floored { 0.0 } else { 1.0 };
            // d(p/s)/da = o/s - p a/s^3 when the norm is not floored.
            for j in 0..out.a.len() {
                let dn_extra = -h.o[j] / s + nf * g.p * h.a[j] / (s2 * s);
                out.a[j] += acc.z[j] / s + acc.c * dn_extra / s - nf * acc.d * h.a[j] / s2;
                out.o[j] += -acc.c * h.a[j] / s2;
            }
            out.r += acc.c / s;
        }
    }

    fn finish_cost(&self, q: &[f64], dsum: f64, grads: &mut Gradients) {
        let s = self.cost_norm;
        let nf = if self.cost_floored { 0.0 } else { 1.0 };
        for ((g, qi), ci) in grads.cost.iter_mut().zip(q).zip(self.cost) {
            *g += qi / s - nf * dsum * ci / (s * s);
        }
    }
}

/// Per-sample loss values and unweighted gradients of the margin terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTerms {
    pub l_pos: f64,
    /// `None` when no usable negative was supplied.
    pub l_neg: Option<f64>,
    pub grad_pos: Gradients,
    pub grad_neg: Gradients,
    /// Number of negatives actually used (duplicates of `y*` removed).
    pub num_negatives: usize,
}

/// `L+ = (1/m) sum_i max(0, mu_pos - d_i(y*))` over the learnable rows.
pub fn positive_loss(poly: &LearnablePolytope, y_star: &[i64], mu_pos: f64) -> Result<f64> {
    check_dim(poly.dim(), y_star.len())?;
    let m = poly.num_rows();
    if m == 0 {
        return Ok(0.0);
    }
    let d = poly.distances(&to_f64(y_star))?;
    Ok(d.iter().map(|&di| (mu_pos - di).max(0.0)).sum::<f64>() / m as f64)
}

/// `L- = (1/|N|) sum_{y-} sum_i w_i max(0, mu_neg + d_i(y-))` over the learnable rows and `cost_row`.
pub fn negative_loss(
    poly: &LearnablePolytope,
    cost_row: &Hyperplane,
    negatives: &[Vec<i64>],
    hyper: &LossHyper,
) -> Result<f64> {
    hyper.validate()?;
    if negatives.is_empty() {
        return Err(Error::invalid("empty negative set"));
    }
    check_dim(poly.dim(), cost_row.dim())?;
    let mut w = Vec::new();
    let mut total = 0.0;
    for neg in negatives {
        check_dim(poly.dim(), neg.len())?;
        let z = to_f64(neg);
        let mut d = poly.distances(&z)?;
        d.push(cost_row.signed_distance(&z)?);
        soft_assignment_into(&d, hyper.tau, &mut w);
        total += d.iter().zip(&w).map(|(&di, &wi)| wi * (hyper.mu_neg + di).max(0.0)).sum::<f64>();
    }
    Ok(total / negatives.len() as f64)
}

/// Pairwise cosine form `sum_{i != j} cos(a_i, a_j)` over stored units.
pub fn covariance_loss_pairwise(poly: &LearnablePolytope) -> f64 {
    let unit: Vec<Vec<f64>> = poly
        .units()
        .iter()
        .map(|h| {
            let s = h.norm();
            h.a.iter().map(|v| v / s).collect()
        })
        .collect();
    let mut total = 0.0;
    for i in 0..unit.len() {
        for j in 0..unit.len() {
            if i != j {
                total += dot(&unit[i], &unit[j]);
            }
        }
    }
    total
}

/// `|sum_i a_i/|a_i||^2 - m`, equal to the pairwise cosine sum. Tied
/// equality pairs contribute one normal.
pub fn covariance_loss(poly: &LearnablePolytope) -> f64 {
    covariance_sum_sq(poly) - poly.num_units() as f64
}

/// `|sum_i a_i/|a_i||^2`, the covariance loss without its constant offset.
pub fn covariance_sum_sq(poly: &LearnablePolytope) -> f64 {
    let sum = unit_normal_sum(poly);
    dot(&sum, &sum)
}

fn unit_normal_sum(poly: &LearnablePolytope) -> Vec<f64> {
    let mut sum = vec![0.0; poly.dim()];
    for h in poly.units() {
        axpy(1.0 / h.norm(), &h.a, &mut sum);
    }
    sum
}

/// Covariance loss and its gradient with respect to every unit normal.
pub fn covariance_loss_and_grad(poly: &LearnablePolytope) -> (f64, Gradients) {
    let sum = unit_normal_sum(poly);
    let value = dot(&sum, &sum) - poly.num_units() as f64;
    let mut grads = Gradients::zeros_like(poly);
    for (h, g) in poly.units().iter().zip(&mut grads.units) {
        let raw = norm2(&h.a);
        let s = raw.max(NORM_FLOOR);
        let proj = if raw < NORM_FLOOR { 0.0 } else { dot(&h.a, &sum) / s };
        for j in 0..g.a.len() {
            let unit_j = h.a[j] / s;
            g.a[j] = 2.0 * (sum[j] - proj * unit_j) / s;
        }
    }
    (value, grads)
}

/// Loss values and unweighted gradients of `L+` and `L-` for one sample.
///
/// `cost` is the cost vector of the sample. Negatives equal to `y_star` are
/// ignored.
pub fn sample_terms(
    poly: &LearnablePolytope,
    cost: &[f64],
    y_star: &[i64],
    negatives: &[Vec<i64>],
    hyper: &LossHyper,
) -> Result<SampleTerms> {
    hyper.validate()?;
    check_dim(poly.dim(), y_star.len())?;
    let ev = Evaluator::new(poly, cost)?;
    let m = ev.m();
    let y = to_f64(y_star);
    let mut grad_pos = Gradients::zeros_like(poly);
    let mut grad_neg = Gradients::zeros_like(poly);
    let mut d = Vec::with_capacity(m + 1);

    // positive term
    let mut l_pos = 0.0;
    if m > 0 {
        ev.row_distances(&y, &mut d);
        let mut accs = ev.new_accs();
        let inv_m = 1.0 / m as f64;
        for (i, &di) in d.iter().enumerate() {
            if !di.is_finite() {
                return Err(Error::numeric(Some(ev.views[i].unit), "non-finite distance at y*"));
            }
            let h = hyper.mu_pos - di;
            if h > 0.0 {
                l_pos += h * inv_m;
                ev.accumulate(&mut accs, i, -inv_m, di, &y);
            }
        }
        ev.finish(&accs, &mut grad_pos);
    }

    // negative term
    let usable: Vec<&Vec<i64>> = negatives.iter().filter(|z| z.as_slice() != y_star).collect();
    for z in &usable {
        check_dim(poly.dim(), z.len())?;
    }
    let mut l_neg = None;
    if !usable.is_empty() {
        let inv_n = 1.0 / usable.len() as f64;
        let mut accs = ev.new_accs();
        let mut q = vec![0.0; poly.dim()];
        let mut dcost_sum = 0.0;
        let mut w = Vec::with_capacity(m + 1);
        let mut total = 0.0;
        for neg in usable {
            let z = to_f64(neg);
            ev.row_distances(&z, &mut d);
            d.push(ev.cost_distance(&y, &z));
            if let Some(i) = d.iter().position(|v| !v.is_finite()) {
                let row = if i < m { Some(ev.views[i].unit) } else { Some(poly.num_units()) };
                return Err(Error::numeric(row, "non-finite distance at negative"));
            }
            soft_assignment_into(&d, hyper.tau, &mut w);
            for (i, (&di, &wi)) in d.iter().zip(&w).enumerate() {
                let h = hyper.mu_neg + di;
                if h > 0.0 && wi > 0.0 {
                    total += wi * h * inv_n;
                    let coef = wi * inv_n;
                    if i < m {
                        ev.accumulate(&mut accs, i, coef, di, &z);
                    } else {
                        for ((qj, yj), zj) in q.iter_mut().zip(&y).zip(&z) {
                            *qj += coef * (yj - zj);
                        }
                        dcost_sum += coef * di;
                    }
                }
            }
        }
        ev.finish(&accs, &mut grad_neg);
        ev.finish_cost(&q, dcost_sum, &mut grad_neg);
        l_neg = Some(total);
    }

    let num_negatives = negatives.iter().filter(|z| z.as_slice() != y_star).count();
    for g in [&grad_pos, &grad_neg] {
        if let Some(row) = g.first_non_finite() {
            return Err(Error::numeric(Some(row), "non-finite gradient"));
        }
    }
    Ok(SampleTerms { l_pos, l_neg, grad_pos, grad_neg, num_negatives })
}

/// Full weighted loss `lambda_pos L+ + lambda_neg L- + lambda_cov Lo` for one
/// sample with analytic gradients. The weights come from `stats` and are
/// treated as constants.
pub fn ilp_loss_and_grad(
    poly: &LearnablePolytope,
    cost: &[f64],
    y_star: &[i64],
    negatives: &[Vec<i64>],
    hyper: &LossHyper,
    stats: &CovStats,
) -> Result<LossReport> {
    let terms = sample_terms(poly, cost, y_star, negatives, hyper)?;
    let (l_cov, grad_cov) = covariance_loss_and_grad(poly);
    let lambdas = cov_weights(stats);
    let mut grads = Gradients::zeros_like(poly);
    grads.add_scaled(&terms.grad_pos, lambdas.pos);
    grads.add_scaled(&terms.grad_neg, lambdas.neg);
    grads.add_scaled(&grad_cov, lambdas.cov);
    if let Some(row) = grads.first_non_finite() {
        return Err(Error::numeric(Some(row), "non-finite gradient"));
    }
    Ok(LossReport { l_pos: terms.l_pos, l_neg: terms.l_neg.unwrap_or(0.0), l_cov, lambdas, grads })
}
