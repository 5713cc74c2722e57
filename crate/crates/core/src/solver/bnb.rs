//! Best-first branch-and-bound over the integer box with LP relaxation bounds.
//!
//! The search runs in two passes. The first finds the optimal objective
//! value, pruning nodes whose relaxation cannot improve on the incumbent. The
//! second walks the variables in order and fixes each one to the smallest
//! value for which a point of optimal cost still exists, giving the
//! lexicographically smallest optimum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use super::simplex::{solve_lp, LpOutcome, LpProblem};
use super::{tie_tol, IlpInstance, SolveResult, SolveStatus, FEAS_TOL};
use crate::error::Result;

const INT_TOL: f64 = 1e-9;
const LP_SLACK: f64 = FEAS_TOL + 1e-7;

#[derive(Debug, Clone, Default)]
pub struct BnbOptions {
    pub time_limit: Option<Duration>,
    /// Cap on branch-and-bound nodes; reaching it reports a timeout.
    pub node_limit: Option<usize>,
}

impl BnbOptions {
    pub fn with_node_limit(nodes: usize) -> Self {
        Self { time_limit: None, node_limit: Some(nodes) }
    }
}

struct Node {
    lo: Vec<i64>,
    hi: Vec<i64>,
    priority: f64,
    seq: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.priority.total_cmp(&self.priority).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    inst: &'a IlpInstance,
    lp_b: Vec<f64>,
    start: Instant,
    opts: &'a BnbOptions,
    nodes: usize,
    lp_calls: usize,
}

struct Timeout;

impl<'a> Search<'a> {
    fn out_of_budget(&self) -> bool {
        if let Some(limit) = self.opts.node_limit {
            if self.nodes >= limit {
                return true;
            }
        }
        matches!(self.opts.time_limit, Some(t) if self.start.elapsed() >= t)
    }

    fn lp(&mut self, c: &[f64], extra: Option<(&[f64], f64)>, lo: &[i64], hi: &[i64]) -> LpOutcome {
        self.lp_calls += 1;
        let lo: Vec<f64> = lo.iter().map(|&v| v as f64).collect();
        let hi: Vec<f64> = hi.iter().map(|&v| v as f64).collect();
        match extra {
            None => solve_lp(&LpProblem { c, a: &self.inst.a, b: &self.lp_b, lo: &lo, hi: &hi }),
            Some((row, b)) => {
                let mut a = self.inst.a.clone();
                a.push(row.to_vec());
                let mut bb = self.lp_b.clone();
                bb.push(b);
                solve_lp(&LpProblem { c, a: &a, b: &bb, lo: &lo, hi: &hi })
            }
        }
    }

    /// Rounds an LP point if it is integral and feasible.
    fn integral_point(&self, x: &[f64]) -> Option<Vec<i64>> {
        if x.iter().all(|v| (v - v.round()).abs() <= INT_TOL) {
            let z: Vec<i64> = x.iter().map(|v| v.round() as i64).collect();
            if self.inst.is_feasible(&z) {
                return Some(z);
            }
        }
        None
    }

    /// First pass: the optimal objective value and one point attaining it.
    fn minimize(&mut self, warm: Option<Vec<i64>>) -> (Option<(f64, Vec<i64>)>, bool) {
        let mut incumbent = warm.map(|z| (self.inst.objective(&z), z));
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        heap.push(Node {
            lo: self.inst.bounds.lo.clone(),
            hi: self.inst.bounds.hi.clone(),
            priority: f64::NEG_INFINITY,
            seq,
        });
        let prunable = |bound: f64, inc: &Option<(f64, Vec<i64>)>| match inc {
            Some((v, _)) => bound >= v - tie_tol(*v),
            None => false,
        };
        while let Some(node) = heap.pop() {
            if prunable(node.priority, &incumbent) {
                continue;
            }
            if self.out_of_budget() {
                return (incumbent, true);
            }
            self.nodes += 1;
            let c = self.inst.c.clone();
            let (bound, x) = match self.lp(&c, None, &node.lo, &node.hi) {
                LpOutcome::Infeasible => continue,
                LpOutcome::Stalled => (node.priority, None),
                LpOutcome::Optimal { x, objective } => (objective, Some(x)),
            };
            if prunable(bound, &incumbent) {
                continue;
            }
            let mut split = None;
            if let Some(x) = &x {
                let frac = x
                    .iter()
                    .enumerate()
                    .map(|(j, v)| (j, (v - v.round()).abs()))
                    .filter(|(_, f)| *f > INT_TOL)
                    .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
                match frac {
                    Some((j, _)) => {
                        let v = x[j];
                        split = Some((j, v.floor() as i64));
                    }
                    None => {
                        if let Some(z) = self.integral_point(x) {
                            let obj = self.inst.objective(&z);
                            if incumbent.as_ref().is_none_or(|(v, _)| obj < *v) {
                                incumbent = Some((obj, z));
                            }
                            continue;
                        }
                    }
                }
            }
            let (j, mid) = match split {
                Some(s) => s,
                None => match (0..node.lo.len()).find(|&j| node.lo[j] < node.hi[j]) {
                    Some(j) => (j, node.lo[j] + (node.hi[j] - node.lo[j]) / 2),
                    None => {
                        let z = node.lo.clone();
                        if self.inst.is_feasible(&z) {
                            let obj = self.inst.objective(&z);
                            if incumbent.as_ref().is_none_or(|(v, _)| obj < *v) {
                                incumbent = Some((obj, z));
                            }
                        }
                        continue;
                    }
                },
            };
            let mid = mid.clamp(node.lo[j], node.hi[j] - 1);
            let mut left_hi = node.hi.clone();
            left_hi[j] = mid;
            let mut right_lo = node.lo.clone();
            right_lo[j] = mid + 1;
            seq += 1;
            heap.push(Node { lo: node.lo.clone(), hi: left_hi, priority: bound, seq });
            seq += 1;
            heap.push(Node { lo: right_lo, hi: node.hi, priority: bound, seq });
        }
        (incumbent, false)
    }

    /// Second pass: lexicographically smallest point with cost at most `threshold`.
    fn lex_smallest(&mut self, threshold: f64, witness: Vec<i64>) -> std::result::Result<Option<Vec<i64>>, Timeout> {
        let neg_c: Vec<f64> = self.inst.c.iter().map(|v| -v).collect();
        let mut lo = self.inst.bounds.lo.clone();
        let mut hi = self.inst.bounds.hi.clone();
        self.lex_dfs(0, &mut lo, &mut hi, Some(&witness), &neg_c, threshold)
    }

    fn lex_dfs(
        &mut self,
        k: usize,
        lo: &mut [i64],
        hi: &mut [i64],
        witness: Option<&[i64]>,
        neg_c: &[f64],
        threshold: f64,
    ) -> std::result::Result<Option<Vec<i64>>, Timeout> {
        let n = lo.len();
        if k == n {
            let ok = self.inst.is_feasible(lo) && self.inst.objective(lo) <= threshold;
            return Ok(ok.then(|| lo.to_vec()));
        }
        if let Some(t) = self.opts.time_limit {
            if self.start.elapsed() >= t {
                return Err(Timeout);
            }
        }
        let cost_row = Some((neg_c, threshold + LP_SLACK));
        let (l0, h0) = (lo[k], hi[k]);
        let mut first = l0;
        if witness.is_none_or(|w| w[k] != l0) {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            match self.lp(&e, cost_row, lo, hi) {
                LpOutcome::Infeasible => return Ok(None),
                LpOutcome::Optimal { objective, .. } => {
                    first = ((objective - 1e-6).ceil() as i64).clamp(l0, h0);
                }
                LpOutcome::Stalled => {}
            }
        }
        for v in first..=h0 {
            lo[k] = v;
            hi[k] = v;
            let found = match witness {
                Some(w) if w[k] == v => self.lex_dfs(k + 1, lo, hi, Some(w), neg_c, threshold)?,
                _ => {
                    let c = self.inst.c.clone();
                    match self.lp(&c, cost_row, lo, hi) {
                        LpOutcome::Infeasible => None,
                        LpOutcome::Optimal { x, .. } => {
                            let w = self
                                .integral_point(&x)
                                .filter(|z| self.inst.objective(z) <= threshold);
                            self.lex_dfs(k + 1, lo, hi, w.as_deref(), neg_c, threshold)?
                        }
                        LpOutcome::Stalled => self.lex_dfs(k + 1, lo, hi, None, neg_c, threshold)?,
                    }
                }
            };
            if found.is_some() {
                lo[k] = l0;
                hi[k] = h0;
                return Ok(found);
            }
        }
        lo[k] = l0;
        hi[k] = h0;
        Ok(None)
    }
}

/// Branch-and-bound with an optional warm start. A feasible warm start seeds
/// the incumbent; it only ever reduces the number of explored nodes.
pub fn solve_bnb(inst: &IlpInstance, warm_start: Option<&[i64]>, opts: &BnbOptions) -> Result<SolveResult> {
    inst.validate()?;
    let mut search = Search {
        inst,
        lp_b: inst.b.iter().map(|b| b + LP_SLACK).collect(),
        start: Instant::now(),
        opts,
        nodes: 0,
        lp_calls: 0,
    };
    let warm = warm_start.filter(|z| z.len() == inst.num_vars() && inst.is_feasible(z)).map(<[i64]>::to_vec);
    let (incumbent, timed_out) = search.minimize(warm);
    let nodes = search.nodes;
    let timeout = |inc: Option<(f64, Vec<i64>)>| {
        let (objective, z) = match inc {
            Some((v, z)) => (v, Some(z)),
            None => (f64::INFINITY, None),
        };
        SolveResult { status: SolveStatus::Timeout, z, objective, nodes_explored: nodes }
    };
    if timed_out {
        return Ok(timeout(incumbent));
    }
    let Some((best, witness)) = incumbent else {
        return Ok(SolveResult::infeasible(nodes));
    };
    let threshold = best + tie_tol(best);
    match search.lex_smallest(threshold, witness.clone()) {
        Ok(Some(z)) => {
            log::trace!("bnb: {} nodes, {} LP solves", nodes, search.lp_calls);
            Ok(SolveResult { status: SolveStatus::Optimal, objective: inst.objective(&z), z: Some(z), nodes_explored: nodes })
        }
        // the witness itself qualifies, so an empty result only follows from LP trouble
        Ok(None) => Ok(SolveResult { status: SolveStatus::Optimal, objective: best, z: Some(witness), nodes_explored: nodes }),
        Err(Timeout) => Ok(timeout(Some((best, witness)))),
    }
}
