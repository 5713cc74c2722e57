use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use ilploss::data::{load_dataset, Dataset};
use ilploss::polytope::{InitScheme, IntBox};
use ilploss::solver::{evaluate, EvalOptions};
use ilploss::train::{backend_for, default_lr, fit, ConstraintSpec, Snapshot, TaskSpec, TrainConfig, Weighting};
use serde::{Deserialize, Serialize};

use crate::config::{emit, resolve, OUTPUT_FORMAT_VERSION};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerArg {
    Khop,
    Projection,
    Batch,
    Solver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingArg {
    Cov,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InitArg {
    Uniform,
    Gaussian,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainFlags {
    /// JSON file with defaults for any of the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training dataset.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Validation dataset; without it the tail of the training set is held out.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Fraction of the training file held out when --val is absent.
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Optional test dataset scored with the best snapshot.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Output directory for snapshot.json, log.jsonl and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue from a snapshot, restoring parameters, moments and temperature.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long)]
    tau_factor: Option<f64>,
    /// Learning-rate multiplier applied at each temperature anneal.
    #[arg(long)]
    lr_factor: Option<f64>,
    #[arg(long)]
    plateau_patience: Option<usize>,
    #[arg(long)]
    early_stop_patience: Option<usize>,
    #[arg(long)]
    mu_pos: Option<f64>,
    #[arg(long)]
    mu_neg: Option<f64>,
    /// Stop after this many seconds; the run is reported as truncated.
    #[arg(long)]
    wall_clock_limit: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    cov_warmup: Option<u64>,
    #[arg(long)]
    full_val_samples: Option<usize>,
    #[arg(long)]
    val_node_limit: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Loss-term weighting.
    #[arg(long, value_enum)]
    weighting: Option<WeightingArg>,
    /// Learnable units (inequalities, or tied equalities for sudoku).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    /// Negative samplers to enable.
    #[arg(long, value_enum, value_delimiter = ',')]
    samplers: Option<Vec<SamplerArg>>,
    #[arg(long)]
    khop_max: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct TrainRunConfig {
    pub train: Option<PathBuf>,
    pub val: Option<PathBuf>,
    pub val_fraction: f64,
    pub test: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub seed: u64,
    pub jobs: usize,
    /// Defaults to 0.01 per unit of the widest box range.
    pub lr: Option<f64>,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub tau0: f64,
    pub tau_factor: f64,
    pub lr_factor: f64,
    pub plateau_patience: usize,
    pub early_stop_patience: usize,
    pub mu_pos: f64,
    pub mu_neg: f64,
    pub wall_clock_limit: Option<f64>,
    pub clip_norm: f64,
    pub cov_warmup: u64,
    pub full_val_samples: usize,
    pub val_node_limit: usize,
    pub restarts: usize,
    pub weighting: WeightingArg,
    pub m: Option<usize>,
    pub init: Option<InitArg>,
    pub samplers: Option<Vec<SamplerArg>>,
    pub khop_max: Option<usize>,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            train: None,
            val: None,
            val_fraction: 0.1,
            test: None,
            out: None,
            resume: None,
            seed: t.seed,
            jobs: t.jobs,
            lr: None,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            tau0: t.tau0,
            tau_factor: t.tau_factor,
            lr_factor: t.lr_factor,
            plateau_patience: t.plateau_patience,
            early_stop_patience: t.early_stop_patience,
            mu_pos: t.mu_pos,
            mu_neg: t.mu_neg,
            wall_clock_limit: t.wall_clock_limit_s,
            clip_norm: t.clip_norm,
            cov_warmup: t.cov_warmup,
            full_val_samples: t.full_val_samples,
            val_node_limit: t.val_node_limit,
            restarts: t.restarts,
            weighting: WeightingArg::Cov,
            m: None,
            init: None,
            samplers: None,
            khop_max: None,
        }
    }
}

impl TrainRunConfig {
    fn train_config(&self, bounds: &IntBox) -> TrainConfig {
        TrainConfig {
            lr: self.lr.unwrap_or_else(|| default_lr(bounds)),
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            tau0: self.tau0,
            tau_factor: self.tau_factor,
            lr_factor: self.lr_factor,
            plateau_patience: self.plateau_patience,
            early_stop_patience: self.early_stop_patience,
            mu_pos: self.mu_pos,
            mu_neg: self.mu_neg,
            wall_clock_limit_s: self.wall_clock_limit,
            seed: self.seed,
            clip_norm: self.clip_norm,
            cov_warmup: self.cov_warmup,
            full_val_samples: self.full_val_samples,
            val_node_limit: self.val_node_limit,
            jobs: self.jobs,
            restarts: self.restarts,
            weighting: match self.weighting {
                WeightingArg::Cov => Weighting::Cov,
                WeightingArg::Uniform => Weighting::Uniform,
            },
        }
    }

    fn task(&self, train: &Dataset) -> Result<TaskSpec, CliError> {
        let mut task = TaskSpec::for_dataset(train)?;
        if let Some(m) = self.m {
            task.constraints = match task.constraints {
                ConstraintSpec::Inequalities { .. } => ConstraintSpec::Inequalities { m },
                ConstraintSpec::Equalities { .. } => ConstraintSpec::Equalities { m },
                ConstraintSpec::None => return Err(CliError::Usage("--m does not apply to a task without learned constraints".into())),
            };
        }
        if let Some(init) = self.init {
            task.init = match init {
                InitArg::Uniform => InitScheme::Uniform,
                InitArg::Gaussian => InitScheme::Gaussian,
            };
        }
        if let Some(list) = &self.samplers {
            task.sampler.use_khop = list.contains(&SamplerArg::Khop);
            task.sampler.use_projection = list.contains(&SamplerArg::Projection);
            task.sampler.use_batch = list.contains(&SamplerArg::Batch);
            task.sampler.use_solver = list.contains(&SamplerArg::Solver);
        }
        if let Some(k) = self.khop_max {
            task.sampler.khop_max = k;
        }
        task.sampler.seed = self.seed;
        task.sampler.validate()?;
        Ok(task)
    }
}

fn split_off_val(ds: Dataset, fraction: f64) -> Result<(Dataset, Dataset), CliError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CliError::Usage(format!("--val-fraction must lie in (0, 1), got {fraction}")));
    }
    let nval = ((ds.len() as f64 * fraction).round() as usize).max(1);
    if nval >= ds.len() {
        return Err(CliError::Data("training set too small to hold out validation samples".into()));
    }
    let cut = ds.len() - nval;
    let val = Dataset { meta: ds.meta.clone(), samples: ds.samples[cut..].to_vec() };
    let train = Dataset { meta: ds.meta, samples: ds.samples[..cut].to_vec() };
    Ok((train, val))
}

pub fn run(flags: TrainFlags) -> Result<(), CliError> {
    let (cfg, mut echo): (TrainRunConfig, _) = resolve(&flags, flags.config.as_deref())?;
    let train_path = cfg.train.as_ref().ok_or_else(|| CliError::Usage("--train is required".into()))?;
    let out = cfg.out.as_ref().ok_or_else(|| CliError::Usage("--out is required".into()))?;
    let full = load_dataset(train_path)?;
    let (train, val) = match &cfg.val {
        Some(p) => (full, load_dataset(p)?),
        None => split_off_val(full, cfg.val_fraction)?,
    };
    let test = cfg.test.as_ref().map(|p| load_dataset(p)).transpose()?;
    let train_cfg = cfg.train_config(&train.meta.bounds);
    echo["lr"] = train_cfg.lr.into();

    let (task, resume) = match &cfg.resume {
        Some(p) => {
            let snap = Snapshot::load(p)?;
            (snap.task, Some(snap.state))
        }
        None => (cfg.task(&train)?, None),
    };
    let outcome = fit(&train_cfg, &train, &val, &task, resume)?;

    std::fs::create_dir_all(out)?;
    let snapshot = Snapshot::new(echo.clone(), train_cfg.clone(), task, outcome.state.clone());
    snapshot.save(&out.join("snapshot.json"))?;

    let mut log = std::io::BufWriter::new(std::fs::File::create(out.join("log.jsonl"))?);
    let header = serde_json::json!({ "kind": "header", "format_version": OUTPUT_FORMAT_VERSION, "config": echo });
    writeln!(log, "{header}")?;
    for rec in &outcome.log {
        writeln!(log, "{}", serde_json::to_string(rec).expect("log record serializes"))?;
    }
    log.flush()?;

    let test_report = match &test {
        Some(t) => {
            let backend = backend_for(&t.meta.bounds, usize::MAX);
            Some(evaluate(&outcome.model, &t.samples, &backend, &EvalOptions { warm_start: false, jobs: cfg.jobs })?)
        }
        None => None,
    };
    let best = outcome.state.best.as_ref();
    let summary = serde_json::json!({
        "format_version": OUTPUT_FORMAT_VERSION,
        "config": echo,
        "best_epoch": best.map(|b| b.epoch),
        "best_val_fast": best.map(|b| b.metrics.fast),
        "best_val_full": best.map(|b| b.metrics.full),
        "test_accuracy": test_report.as_ref().map(|r| r.accuracy),
        "test_counts": test_report.as_ref().map(|r| serde_json::json!({
            "correct": r.correct, "total": r.total, "optimal": r.optimal, "infeasible": r.infeasible, "timeout": r.timeout,
        })),
        "epochs": outcome.epochs_run,
        "wall_time_s": outcome.elapsed_s,
        "wall_time_min": outcome.elapsed_s / 60.0,
        "truncated": outcome.truncated,
    });
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    emit(&serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}
