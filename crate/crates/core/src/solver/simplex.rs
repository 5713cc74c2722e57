//! Dense bounded-variable primal simplex for the LP relaxations.
//!
//! Solves `min c·x` subject to `A x + b >= 0` and `lo <= x <= hi` with all
//! bounds finite. Two phases; artificial variables only for rows whose
//! slack cannot start basic. Falls back to Bland's rule after a run of
//! degenerate pivots.

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const DEGENERATE_SWITCH: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    /// Iteration cap reached; no bound is available.
    Stalled,
}

pub struct LpProblem<'a> {
    pub c: &'a [f64],
    pub a: &'a [Vec<f64>],
    pub b: &'a [f64],
    pub lo: &'a [f64],
    pub hi: &'a [f64],
}

struct Tableau {
    rows: usize,
    cols: usize,
    t: Vec<f64>,
    d: Vec<f64>,
    beta: Vec<f64>,
    basic: Vec<usize>,
    at_upper: Vec<bool>,
    ub: Vec<f64>,
    is_basic: Vec<bool>,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.cols + j]
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.ub[j]
        } else {
            0.0
        }
    }

    fn reduced_costs(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for i in 0..self.rows {
            let cb = cost[self.basic[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.cols..(i + 1) * self.cols];
                for (dj, tij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let p = self.at(r, j);
        for v in &mut self.t[r * cols..(r + 1) * cols] {
            *v /= p;
        }
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        for row in before.chunks_exact_mut(cols).chain(after.chunks_exact_mut(cols)) {
            let f = row[j];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[j] = 0.0;
            }
        }
        let f = self.d[j];
        if f != 0.0 {
            for (v, pv) in self.d.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            self.d[j] = 0.0;
        }
    }

    /// Runs simplex iterations on the current reduced costs. Returns false on the iteration cap.
    fn optimize(&mut self, max_iter: usize) -> bool {
        let mut degenerate = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate >= DEGENERATE_SWITCH;
            let mut enter = None;
            let mut best = 0.0;
            for j in 0..self.cols {
                if self.is_basic[j] || self.ub[j] <= 0.0 {
                    continue;
                }
                let dj = self.d[j];
                let gain = if self.at_upper[j] { dj } else { -dj };
                if gain > COST_TOL {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if gain > best {
                        best = gain;
                        enter = Some(j);
                    }
                }
            }
            let Some(j) = enter else {
                return true;
            };
            let dir = if self.at_upper[j] { -1.0 } else { 1.0 };
            let mut theta = self.ub[j];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_mag = 0.0;
            for i in 0..self.rows {
                let alpha = dir * self.at(i, j);
                let bv = self.basic[i];
                let (lim, to_upper) = if alpha > PIVOT_TOL {
                    ((self.beta[i]).max(0.0) / alpha, false)
                } else if alpha < -PIVOT_TOL && self.ub[bv].is_finite() {
                    ((self.ub[bv] - self.beta[i]).max(0.0) / -alpha, true)
                } else {
                    continue;
                };
                let better = if lim < theta - 1e-12 {
                    true
                } else if lim <= theta + 1e-12 {
                    match leave {
                        Some((li, _)) if bland => bv < self.basic[li],
                        Some(_) => alpha.abs() > leave_mag,
                        None => false,
                    }
                } else {
                    false
                };
                if better {
                    theta = lim;
                    leave = Some((i, to_upper));
                    leave_mag = alpha.abs();
                }
            }
            if !theta.is_finite() {
                // cannot happen with finite variable bounds and nonnegative slacks in phase 1
                return false;
            }
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for i in 0..self.rows {
                let tij = self.at(i, j);
                if tij != 0.0 {
                    self.beta[i] -= dir * theta * tij;
                }
            }
            match leave {
                None => {
                    self.at_upper[j] = !self.at_upper[j];
                }
                Some((r, to_upper)) => {
                    let entering_value = self.nonbasic_value(j) + dir * theta;
                    let out = self.basic[r];
                    self.is_basic[out] = false;
                    self.at_upper[out] = to_upper;
                    self.pivot(r, j);
                    self.basic[r] = j;
                    self.is_basic[j] = true;
                    self.at_upper[j] = false;
                    self.beta[r] = entering_value;
                }
            }
        }
        false
    }
}

/// Solves the LP. Rows with a zero normal are checked directly.
pub fn solve_lp(p: &LpProblem<'_>) -> LpOutcome {
    let n = p.c.len();
    let width: Vec<f64> = (0..n).map(|j| p.hi[j] - p.lo[j]).collect();
    if width.iter().any(|w| *w < 0.0) {
        return LpOutcome::Infeasible;
    }
    // g_i = -b_i - a_i·lo ; constraint a_i·w >= g_i
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(p.a.len());
    for (a, &b) in p.a.iter().zip(p.b) {
        let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let g = -b - a.iter().zip(p.lo).map(|(x, l)| x * l).sum::<f64>();
        if scale < 1e-12 {
            if g > 1e-9 {
                return LpOutcome::Infeasible;
            }
            continue;
        }
        rows.push((a.iter().map(|v| v / scale).collect(), g / scale));
    }
    let m = rows.len();
    let num_art = rows.iter().filter(|(_, g)| *g > 0.0).count();
    let cols = n + m + num_art;
    let mut tab = Tableau {
        rows: m,
        cols,
        t: vec![0.0; m * cols],
        d: vec![0.0; cols],
        beta: vec![0.0; m],
        basic: vec![0; m],
        at_upper: vec![false; cols],
        ub: vec![f64::INFINITY; cols],
        is_basic: vec![false; cols],
    };
    tab.ub[..n].copy_from_slice(&width);
    let mut art = n + m;
    for (i, (a, g)) in rows.iter().enumerate() {
        let row = &mut tab.t[i * cols..(i + 1) * cols];
        if *g <= 0.0 {
            // -a·w + s = -g
            for j in 0..n {
                row[j] = -a[j];
            }
            row[n + i] = 1.0;
            tab.basic[i] = n + i;
            tab.beta[i] = -g;
        } else {
            // a·w - s + art = g
            row[..n].copy_from_slice(a);
            row[n + i] = -1.0;
            row[art] = 1.0;
            tab.basic[i] = art;
            tab.beta[i] = *g;
            art += 1;
        }
    }
    for &bv in &tab.basic {
        tab.is_basic[bv] = true;
    }
    let max_iter = 50 * (m + cols) + 1000;

    if num_art > 0 {
        let mut cost1 = vec![0.0; cols];
        cost1[n + m..].iter_mut().for_each(|v| *v = 1.0);
        tab.reduced_costs(&cost1);
        if !tab.optimize(max_iter) {
            return LpOutcome::Stalled;
        }
        let infeas: f64 = (0..m).filter(|&i| tab.basic[i] >= n + m).map(|i| tab.beta[i]).sum();
        let gscale = 1.0 + rows.iter().map(|(_, g)| g.abs()).fold(0.0, f64::max);
        if infeas > 1e-9 * gscale {
            return LpOutcome::Infeasible;
        }
        for j in n + m..cols {
            tab.ub[j] = 0.0;
            tab.at_upper[j] = false;
        }
    }

    let mut cost2 = vec![0.0; cols];
    cost2[..n].copy_from_slice(p.c);
    tab.reduced_costs(&cost2);
    if !tab.optimize(max_iter) {
        return LpOutcome::Stalled;
    }

    let mut w: Vec<f64> = (0..n).map(|j| tab.nonbasic_value(j)).collect();
    for i in 0..m {
        if tab.basic[i] < n {
            w[tab.basic[i]] = tab.beta[i].clamp(0.0, width[tab.basic[i]]);
        }
    }
    let x: Vec<f64> = w.iter().zip(p.lo).map(|(wi, l)| wi + l).collect();
    let objective = x.iter().zip(p.c).map(|(xi, ci)| xi * ci).sum();
    LpOutcome::Optimal { x, objective }
}
