//! Subprocess bridge to an LP-format MIP solver.
//!
//! The command template is a shell command containing `{lp}` (path of the
//! written LP file) and optionally `{sol}` (path the solver writes its
//! solution to). Without `{sol}` the solution is read from stdout.

use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use super::{write_lp_file, IlpInstance, SolveResult, SolveStatus};
use crate::error::{Error, Result};

/// Environment variable holding the command template.
pub const SOLVER_CMD_ENV: &str = "ILPLOSS_SOLVER_CMD";

static FILE_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSolver {
    pub template: String,
}

/// What could be read from a solver's output.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSolution {
    pub infeasible: bool,
    pub objective: Option<f64>,
    /// Variable values by index; absent variables are zero.
    pub values: Vec<f64>,
    pub found_any: bool,
}

/// Reads `x<j> <value>` pairs (an optional `=` between them is skipped) and
/// an objective value from free-form solver output. Works with the common
/// solution formats that list variables by name.
pub fn parse_solution(text: &str, n: usize) -> ParsedSolution {
    let lower = text.to_ascii_lowercase();
    let infeasible = lower.contains("infeasible") && !lower.contains("not infeasible");
    let mut values = vec![0.0; n];
    let mut found_any = false;
    let mut objective = None;
    for line in text.lines() {
        let toks: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ':').filter(|t| !t.is_empty()).collect();
        let l = line.to_ascii_lowercase();
        if objective.is_none() && l.contains("objective") {
            objective = toks.iter().rev().find_map(|t| t.parse::<f64>().ok());
        }
        for (i, tok) in toks.iter().enumerate() {
            let Some(j) = tok.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) else {
                continue;
            };
            let mut rest = toks[i + 1..].iter().filter(|t| **t != "=");
            if let Some(v) = rest.next().and_then(|t| t.parse::<f64>().ok()) {
                if j < n {
                    values[j] = v;
                    found_any = true;
                }
            }
        }
    }
    ParsedSolution { infeasible, objective, values, found_any }
}

impl ExternalSolver {
    pub fn new(template: impl Into<String>) -> Result<Self> {
        let template = template.into();
        if !template.contains("{lp}") {
            return Err(Error::Config("solver command template must contain {lp}".into()));
        }
        Ok(Self { template })
    }

    /// Reads the template from [`SOLVER_CMD_ENV`].
    pub fn from_env() -> Result<Self> {
        match std::env::var(SOLVER_CMD_ENV) {
            Ok(t) if !t.trim().is_empty() => Self::new(t),
            _ => Err(Error::SolverUnavailable(format!("{SOLVER_CMD_ENV} is not set"))),
        }
    }

    fn scratch_path(ext: &str) -> PathBuf {
        let id = FILE_COUNTER.fetch_add(1, Ordering::Relaxed);
        std::env::temp_dir().join(format!("ilploss-{}-{id}.{ext}", std::process::id()))
    }

    /// Solves `inst`. The returned point is rounded, then checked for box
    /// membership and feasibility; a point failing the check is an error.
    pub fn solve(&self, inst: &IlpInstance) -> Result<SolveResult> {
        inst.validate()?;
        let lp = Self::scratch_path("lp");
        let sol = Self::scratch_path("sol");
        std::fs::write(&lp, write_lp_file(inst))?;
        let cmd = self.template.replace("{lp}", &lp.to_string_lossy()).replace("{sol}", &sol.to_string_lossy());
        let output = Command::new("sh").arg("-c").arg(&cmd).output();
        let cleanup = || {
            let _ = std::fs::remove_file(&lp);
            let _ = std::fs::remove_file(&sol);
        };
        let output = match output {
            Ok(o) => o,
            Err(e) => {
                cleanup();
                return Err(Error::SolverUnavailable(format!("failed to run `{cmd}`: {e}")));
            }
        };
        let text = if self.template.contains("{sol}") {
            std::fs::read_to_string(&sol).unwrap_or_default()
        } else {
            String::from_utf8_lossy(&output.stdout).into_owned()
        };
        cleanup();
        if !output.status.success() {
            return Err(Error::SolverUnavailable(format!(
                "`{cmd}` exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let parsed = parse_solution(&text, inst.num_vars());
        if parsed.infeasible {
            return Ok(SolveResult::infeasible(0));
        }
        if !parsed.found_any && parsed.objective.is_none() {
            return Err(Error::SolverUnavailable("solver output contained no solution".into()));
        }
        let z: Vec<i64> = parsed.values.iter().map(|v| v.round() as i64).collect();
        if !inst.is_feasible(&z) {
            return Err(Error::numeric(None, "external solver returned an infeasible point"));
        }
        Ok(SolveResult { status: SolveStatus::Optimal, objective: inst.objective(&z), z: Some(z), nodes_explored: 0 })
    }
}
