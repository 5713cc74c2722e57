use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, ValueEnum};
use ilploss::data::load_dataset;
use ilploss::model::{CostSource, Model};
use ilploss::polytope::LearnablePolytope;
use ilploss::solver::{evaluate, Backend, BnbOptions, EvalOptions, EvalReport, ExternalSolver, ENUMERATION_BUDGET};
use ilploss::train::Snapshot;
use serde::{Deserialize, Serialize};

use crate::config::{emit, resolve, OUTPUT_FORMAT_VERSION};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BackendArg {
    /// Enumeration when the box is small enough, otherwise branch-and-bound.
    Auto,
    Exhaustive,
    Bnb,
    /// External solver from the command template in ILPLOSS_SOLVER_CMD.
    External,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvalFlags {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Snapshot written by `train`.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Dataset to solve.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Also solve with the dataset's stored true constraints.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    against_ground_truth: Option<bool>,
    /// Seed branch-and-bound with the label.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    warm_start: Option<bool>,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct EvalConfig {
    pub snapshot: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub backend: BackendArg,
    pub against_ground_truth: bool,
    pub warm_start: bool,
    pub node_limit: Option<usize>,
    pub time_limit: Option<f64>,
    pub jobs: usize,
    /// Unused by evaluation, which is deterministic; accepted for uniform scripting.
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            snapshot: None,
            data: None,
            backend: BackendArg::Auto,
            against_ground_truth: false,
            warm_start: false,
            node_limit: None,
            time_limit: None,
            jobs: 1,
            seed: 0,
            out: None,
        }
    }
}

fn backend(cfg: &EvalConfig, points: f64) -> Result<Backend, CliError> {
    let bnb = || {
        if cfg.time_limit.is_some_and(|t| !(t > 0.0)) {
            return Err(CliError::Usage("--time-limit must be positive".into()));
        }
        Ok(Backend::Bnb(BnbOptions { time_limit: cfg.time_limit.map(Duration::from_secs_f64), node_limit: cfg.node_limit }))
    };
    match cfg.backend {
        BackendArg::Auto if points <= ENUMERATION_BUDGET as f64 => Ok(Backend::Exhaustive),
        BackendArg::Auto | BackendArg::Bnb => bnb(),
        BackendArg::Exhaustive => Ok(Backend::Exhaustive),
        BackendArg::External => Ok(Backend::External(ExternalSolver::from_env()?)),
    }
}

fn summarize(r: &EvalReport) -> serde_json::Value {
    serde_json::json!({
        "accuracy": r.accuracy,
        "correct": r.correct,
        "total": r.total,
        "optimal": r.optimal,
        "infeasible": r.infeasible,
        "timeout": r.timeout,
    })
}

pub fn run(flags: EvalFlags) -> Result<(), CliError> {
    let (cfg, echo): (EvalConfig, _) = resolve(&flags, flags.config.as_deref())?;
    if cfg.snapshot.is_none() && !cfg.against_ground_truth {
        return Err(CliError::Usage("--snapshot is required unless --against-ground-truth is given".into()));
    }
    let data_path = cfg.data.as_ref().ok_or_else(|| CliError::Usage("--data is required".into()))?;
    let data = load_dataset(data_path)?;
    if data.is_empty() {
        return Err(CliError::Data(format!("{} holds no samples", data_path.display())));
    }
    let backend = backend(&cfg, data.meta.bounds.num_points())?;
    let opts = EvalOptions { warm_start: cfg.warm_start, jobs: cfg.jobs };

    let model_report = match &cfg.snapshot {
        Some(p) => {
            let snap = Snapshot::load(p)?;
            if snap.model().polytope.dim() != data.meta.n {
                return Err(CliError::Usage(format!("snapshot has n={} but the dataset has n={}", snap.model().polytope.dim(), data.meta.n)));
            }
            Some(evaluate(snap.model(), &data.samples, &backend, &opts)?)
        }
        None => None,
    };
    let gt_report = if cfg.against_ground_truth {
        let gt = data.meta.ground_truth.as_ref().ok_or_else(|| CliError::Data("dataset stores no ground truth".into()))?;
        let model = Model {
            polytope: LearnablePolytope::empty(data.meta.bounds.clone(), ilploss::polytope::DEFAULT_EPSILON)?,
            fixed_rows: gt.rows(),
            cost: CostSource::Given,
        };
        Some(evaluate(&model, &data.samples, &backend, &opts)?)
    } else {
        None
    };

    let report = serde_json::json!({
        "format_version": OUTPUT_FORMAT_VERSION,
        "config": echo,
        "model": model_report.as_ref().map(summarize),
        "ground_truth": gt_report.as_ref().map(summarize),
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(out) = &cfg.out {
        std::fs::write(out, &text)?;
    }
    emit(&text);
    Ok(())
}
