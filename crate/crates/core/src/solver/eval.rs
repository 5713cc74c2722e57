use serde::{Deserialize, Serialize};

use super::{solve_bnb, solve_exhaustive, BnbOptions, ExternalSolver, SolveStatus};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Debug, Clone)]
pub enum Backend {
    Exhaustive,
    Bnb(BnbOptions),
    External(ExternalSolver),
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Seed branch-and-bound with the label as incumbent (when feasible).
    pub warm_start: bool,
    /// Worker threads; `0` or `1` solves sequentially.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub index: usize,
    pub status: SolveStatus,
    pub correct: bool,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Fraction of samples whose solution equals the label exactly.
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub optimal: usize,
    pub infeasible: usize,
    pub timeout: usize,
    pub outcomes: Vec<SampleOutcome>,
}

fn evaluate_one(model: &Model, rows: &[crate::polytope::Row], index: usize, s: &Sample, backend: &Backend, opts: &EvalOptions) -> Result<SampleOutcome> {
    let inst = model.instance_with_rows(s, rows)?;
    let res = match backend {
        Backend::Exhaustive => solve_exhaustive(&inst)?,
        Backend::Bnb(o) => solve_bnb(&inst, opts.warm_start.then_some(s.y_star.as_slice()), o)?,
        Backend::External(ext) => ext.solve(&inst)?,
    };
    let correct = res.status == SolveStatus::Optimal && res.z.as_deref() == Some(s.y_star.as_slice());
    log::debug!("sample {index}: {:?}, correct={correct}, nodes={}", res.status, res.nodes_explored);
    Ok(SampleOutcome { index, status: res.status, correct, nodes: res.nodes_explored })
}

/// Solves every sample with the model's rows and cost and compares with the
/// label. Timeouts count as incorrect.
pub fn evaluate(model: &Model, samples: &[Sample], backend: &Backend, opts: &EvalOptions) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let rows = model.rows();
    let jobs = opts.jobs.max(1).min(samples.len());
    let outcomes: Vec<SampleOutcome> = if jobs == 1 {
        samples.iter().enumerate().map(|(i, s)| evaluate_one(model, &rows, i, s, backend, opts)).collect::<Result<_>>()?
    } else {
        let chunk = samples.len().div_ceil(jobs);
        let parts: Vec<Result<Vec<SampleOutcome>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = samples
                .chunks(chunk)
                .enumerate()
                .map(|(ci, part)| {
                    let rows = &rows;
                    scope.spawn(move || {
                        part.iter()
                            .enumerate()
                            .map(|(j, s)| evaluate_one(model, rows, ci * chunk + j, s, backend, opts))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
        });
        let mut all = Vec::with_capacity(samples.len());
        for p in parts {
            all.extend(p?);
        }
        all
    };
    let count = |st: SolveStatus| outcomes.iter().filter(|o| o.status == st).count();
    let correct = outcomes.iter().filter(|o| o.correct).count();
    Ok(EvalReport {
        accuracy: correct as f64 / samples.len() as f64,
        correct,
        total: samples.len(),
        optimal: count(SolveStatus::Optimal),
        infeasible: count(SolveStatus::Infeasible),
        timeout: count(SolveStatus::Timeout),
        outcomes,
    })
}
