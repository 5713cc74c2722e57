use std::path::PathBuf;

use clap::Args;
use ilploss::gradcheck::{run_gradcheck, GradCheckConfig};
use serde::{Deserialize, Serialize};

use crate::config::{emit, resolve, OUTPUT_FORMAT_VERSION};
use crate::error::CliError;

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GradcheckFlags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Flip the analytic gradient's sign to confirm the audit fails.
    #[arg(long, hide = true, num_args = 0..=1, default_missing_value = "true")]
    inject_fault: Option<bool>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct GradcheckRunConfig {
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub step: f64,
    pub inject_fault: bool,
    pub out: Option<PathBuf>,
}

impl Default for GradcheckRunConfig {
    fn default() -> Self {
        let d = GradCheckConfig::default();
        Self { trials: d.trials, seed: d.seed, tolerance: d.tolerance, step: d.step, inject_fault: false, out: None }
    }
}

pub fn run(flags: GradcheckFlags) -> Result<(), CliError> {
    let (cfg, echo): (GradcheckRunConfig, _) = resolve(&flags, flags.config.as_deref())?;
    let gc = GradCheckConfig {
        trials: cfg.trials,
        seed: cfg.seed,
        tolerance: cfg.tolerance,
        step: cfg.step,
        inject_fault: cfg.inject_fault,
        ..GradCheckConfig::default()
    };
    let report = run_gradcheck(&gc)?;
    let doc = serde_json::json!({ "format_version": OUTPUT_FORMAT_VERSION, "config": echo, "report": report });
    let text = serde_json::to_string_pretty(&doc).expect("report serializes");
    if let Some(out) = &cfg.out {
        std::fs::write(out, &text)?;
    }
    emit(&text);
    if report.passed {
        return Ok(());
    }
    let worst = report
        .worst
        .map(|w| format!("worst coordinate {} of trial {}: analytic {:e}, numeric {:e}, rel err {:e}", w.coord, w.trial, w.analytic, w.numeric, w.rel_err))
        .unwrap_or_else(|| "no coordinate could be checked".into());
    Err(CliError::CheckFailed(format!("gradient check failed ({} checked, max rel err {:e}); {worst}", report.checked, report.max_rel_err)))
}
