//! Exact ILP solving: full enumeration, LP-based branch-and-bound, an LP-file
//! bridge to external solvers, and accuracy evaluation of learned models.
//!
//! Both in-tree backends return the lexicographically smallest optimal
//! point, so their answers can be compared exactly.

mod bnb;
mod eval;
mod exhaustive;
mod external;
mod lpfile;
pub mod simplex;

pub use bnb::{solve_bnb, BnbOptions};
pub use eval::{evaluate, Backend, EvalOptions, EvalReport, SampleOutcome};
pub use exhaustive::{solve_exhaustive, ENUMERATION_BUDGET};
pub use external::{parse_solution, ExternalSolver, SOLVER_CMD_ENV};
pub use lpfile::{parse_lp_file, write_lp_file};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::dot_int;
use crate::polytope::{IntBox, Row};

/// Slack allowed on `a·z + b >= 0` when checking integer points.
pub const FEAS_TOL: f64 = 1e-6;

/// Objective values within this (relative) distance count as ties.
pub(crate) fn tie_tol(v: f64) -> f64 {
    1e-9 * v.abs().max(1.0)
}

/// `min c·z` subject to `A z + b >= 0`, `z` integer inside `bounds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlpInstance {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub bounds: IntBox,
}

impl IlpInstance {
    pub fn new(c: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64>, bounds: IntBox) -> Result<Self> {
        let inst = Self { c, a, b, bounds };
        inst.validate()?;
        Ok(inst)
    }

    pub fn from_rows(c: Vec<f64>, rows: &[Row], bounds: IntBox) -> Result<Self> {
        let a = rows.iter().map(|r| r.a.clone()).collect();
        let b = rows.iter().map(|r| r.b).collect();
        Self::new(c, a, b, bounds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.c.len();
        check_dim(n, self.bounds.dim())?;
        check_dim(self.a.len(), self.b.len())?;
        for row in &self.a {
            check_dim(n, row.len())?;
        }
        if !self.bounds.is_valid() {
            return Err(Error::invalid("invalid box"));
        }
        let finite = self.c.iter().chain(&self.b).chain(self.a.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("instance data must be finite"));
        }
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.a.len()
    }

    pub fn objective(&self, z: &[i64]) -> f64 {
        dot_int(&self.c, z)
    }

    /// Row feasibility with slack [`FEAS_TOL`]; the box is checked too.
    pub fn is_feasible(&self, z: &[i64]) -> bool {
        self.bounds.contains(z) && self.a.iter().zip(&self.b).all(|(a, b)| dot_int(a, z) + b >= -FEAS_TOL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Optimal point, or the best incumbent on timeout.
    pub z: Option<Vec<i64>>,
    /// `+inf` when no point is known.
    pub objective: f64,
    pub nodes_explored: usize,
}

impl SolveResult {
    pub(crate) fn infeasible(nodes: usize) -> Self {
        Self { status: SolveStatus::Infeasible, z: None, objective: f64::INFINITY, nodes_explored: nodes }
    }
}

/// Exact solve without limits: enumeration when the box fits the budget,
/// branch-and-bound otherwise.
pub fn solve_auto(inst: &IlpInstance) -> Result<SolveResult> {
    if inst.bounds.num_points() <= ENUMERATION_BUDGET as f64 {
        solve_exhaustive(inst)
    } else {
        solve_bnb(inst, None, &BnbOptions::default())
    }
}
