use std::path::PathBuf;

use clap::{Args, ValueEnum};
use ilploss::data::{
    gen_random_constraints, gen_sudoku, gen_toy_cost, save_dataset, Dataset, RandomConstraintsConfig, SudokuConfig,
    ToyCostConfig, Variant,
};
use serde::{Deserialize, Serialize};

use crate::config::{emit, resolve, OUTPUT_FORMAT_VERSION};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    RandomBinary,
    RandomDense,
    Sudoku,
    ToyCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BoxArg {
    Binary,
    Dense,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GenFlags {
    /// JSON file with defaults for any of the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Number of variables (random and toy families).
    #[arg(long)]
    n: Option<usize>,
    /// Hidden constraint count (random families).
    #[arg(long)]
    m_prime: Option<usize>,
    /// Board side (sudoku).
    #[arg(long)]
    k: Option<usize>,
    /// Variables per one-hot group (toy).
    #[arg(long)]
    group: Option<usize>,
    /// Input noise standard deviation (toy).
    #[arg(long)]
    noise: Option<f64>,
    /// Identity input map instead of a random one (toy).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    identity_map: Option<bool>,
    /// Box override; must agree with the family.
    #[arg(long = "box", value_enum)]
    #[serde(rename = "box")]
    box_: Option<BoxArg>,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for train.json, test.json and meta.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GenConfig {
    pub family: FamilyArg,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub m_prime: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub group: Option<usize>,
    #[serde(default)]
    pub noise: Option<f64>,
    #[serde(default)]
    pub identity_map: Option<bool>,
    #[serde(default, rename = "box")]
    pub box_: Option<BoxArg>,
    #[serde(default = "default_train")]
    pub train: usize,
    #[serde(default = "default_test")]
    pub test: usize,
    #[serde(default)]
    pub seed: u64,
    pub out: PathBuf,
}

fn default_train() -> usize {
    1600
}

fn default_test() -> usize {
    200
}

fn reject(cfg: &GenConfig, keys: &[(&str, bool)]) -> Result<(), CliError> {
    for (key, given) in keys {
        if *given {
            return Err(CliError::Usage(format!("--{key} does not apply to family {:?}", cfg.family)));
        }
    }
    Ok(())
}

fn generate(cfg: &GenConfig) -> Result<(Dataset, Dataset), CliError> {
    let need = |v: Option<usize>, key: &str| v.ok_or_else(|| CliError::Usage(format!("--{key} is required for this family")));
    match cfg.family {
        FamilyArg::RandomBinary | FamilyArg::RandomDense => {
            let variant = if cfg.family == FamilyArg::RandomBinary { Variant::Binary } else { Variant::Dense };
            match (variant, cfg.box_) {
                (Variant::Binary, Some(BoxArg::Dense)) | (Variant::Dense, Some(BoxArg::Binary)) => {
                    return Err(CliError::Usage(format!("--box {:?} conflicts with family {:?}", cfg.box_.unwrap(), cfg.family)));
                }
                _ => {}
            }
            reject(cfg, &[("k", cfg.k.is_some()), ("group", cfg.group.is_some()), ("noise", cfg.noise.is_some()), ("identity-map", cfg.identity_map.is_some())])?;
            let rc = RandomConstraintsConfig {
                n: need(cfg.n, "n")?,
                m_prime: cfg.m_prime.unwrap_or(1),
                variant,
                train: cfg.train,
                test: cfg.test,
                seed: cfg.seed,
            };
            Ok(gen_random_constraints(&rc)?)
        }
        FamilyArg::Sudoku => {
            reject(cfg, &[("n", cfg.n.is_some()), ("m-prime", cfg.m_prime.is_some()), ("group", cfg.group.is_some()), ("noise", cfg.noise.is_some()), ("identity-map", cfg.identity_map.is_some()), ("box", cfg.box_ == Some(BoxArg::Dense))])?;
            Ok(gen_sudoku(&SudokuConfig { k: cfg.k.unwrap_or(4), train: cfg.train, test: cfg.test, seed: cfg.seed })?)
        }
        FamilyArg::ToyCost => {
            reject(cfg, &[("k", cfg.k.is_some()), ("m-prime", cfg.m_prime.is_some()), ("box", cfg.box_ == Some(BoxArg::Dense))])?;
            let tc = ToyCostConfig {
                n: cfg.n.unwrap_or(8),
                group: cfg.group.unwrap_or(4),
                train: cfg.train,
                test: cfg.test,
                noise: cfg.noise.unwrap_or(0.0),
                identity_map: cfg.identity_map.unwrap_or(true),
                seed: cfg.seed,
            };
            Ok(gen_toy_cost(&tc)?)
        }
    }
}

pub fn run(flags: GenFlags) -> Result<(), CliError> {
    let (cfg, echo): (GenConfig, _) = resolve(&flags, flags.config.as_deref())?;
    let (train, test) = generate(&cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    save_dataset(&cfg.out.join("train.json"), &train, Some(&echo))?;
    save_dataset(&cfg.out.join("test.json"), &test, Some(&echo))?;
    let meta = serde_json::json!({
        "format_version": OUTPUT_FORMAT_VERSION,
        "config": echo,
        "meta": train.meta,
        "train": train.len(),
        "test": test.len(),
    });
    std::fs::write(cfg.out.join("meta.json"), serde_json::to_string_pretty(&meta).expect("meta serializes"))?;
    emit(&format!("wrote {} train and {} test samples to {}", train.len(), test.len(), cfg.out.display()));
    Ok(())
}
