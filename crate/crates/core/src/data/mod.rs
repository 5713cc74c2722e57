//! Datasets: sample/meta types, the JSON container, and generators for the
//! random-polyhedron, sudoku and learnable-cost families.

mod random;
mod sudoku;
mod toy;

pub use random::{gen_random_constraints, RandomConstraintsConfig, Variant};
pub use sudoku::{blank_fraction, canonical_completion, gen_sudoku, random_board, sudoku_equalities, SudokuConfig};
pub use toy::{gen_toy_cost, ToyCostConfig};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot_int;
use crate::polytope::{IntBox, Row};
use crate::solver::FEAS_TOL;

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Input features.
    pub x: Vec<f64>,
    #[serde(rename = "y")]
    pub y_star: Vec<i64>,
    /// Precomputed cost. When absent the cost is `-x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
}

impl Sample {
    pub fn cost(&self) -> Vec<f64> {
        match &self.c {
            Some(c) => c.clone(),
            None => self.x.iter().map(|v| -v).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    RandomConstraintsBinary,
    RandomConstraintsDense,
    Sudoku,
    ToyCost,
}

/// The hidden constraints that generated a dataset: rows `a·z + b >= 0`
/// and equalities `eq_a·z = eq_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(default)]
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default)]
    pub eq_a: Vec<Vec<f64>>,
    #[serde(default)]
    pub eq_b: Vec<f64>,
    pub m_prime: usize,
}

impl GroundTruth {
    /// All constraints as rows; each equality becomes two opposite rows.
    pub fn rows(&self) -> Vec<Row> {
        let mut rows: Vec<Row> = self.a.iter().zip(&self.b).map(|(a, &b)| Row { a: a.clone(), b }).collect();
        for (a, &v) in self.eq_a.iter().zip(&self.eq_b) {
            rows.push(Row { a: a.clone(), b: -v });
            rows.push(Row { a: a.iter().map(|x| -x).collect(), b: v });
        }
        rows
    }

    pub fn is_feasible(&self, z: &[i64]) -> bool {
        self.rows().iter().all(|r| dot_int(&r.a, z) + r.b >= -FEAS_TOL)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub bounds: IntBox,
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
    pub seed: u64,
    /// Family-specific generation parameters.
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub samples: Vec<Sample>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<serde_json::Value>,
    meta: DatasetMeta,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Checks dimensions, box membership and ground-truth feasibility of every sample.
    pub fn validate(&self) -> Result<()> {
        let meta = &self.meta;
        if meta.bounds.dim() != meta.n || !meta.bounds.is_valid() {
            return Err(Error::Validation { index: 0, msg: "meta box does not match n".into() });
        }
        if let Some(gt) = &meta.ground_truth {
            let ok = gt.a.len() == gt.b.len()
                && gt.eq_a.len() == gt.eq_b.len()
                && gt.a.iter().chain(&gt.eq_a).all(|r| r.len() == meta.n);
            if !ok {
                return Err(Error::Validation { index: 0, msg: "ground truth rows have inconsistent shapes".into() });
            }
        }
        let p = self.samples.first().map(|s| s.x.len());
        for (index, s) in self.samples.iter().enumerate() {
            let err = |msg: String| Err(Error::Validation { index, msg });
            if Some(s.x.len()) != p {
                return err(format!("x has length {}, expected {}", s.x.len(), p.unwrap_or(0)));
            }
            if s.x.iter().any(|v| !v.is_finite()) {
                return err("x has non-finite entries".into());
            }
            if s.y_star.len() != meta.n {
                return err(format!("y has length {}, expected {}", s.y_star.len(), meta.n));
            }
            if !meta.bounds.contains(&s.y_star) {
                return err("y lies outside the box".into());
            }
            match &s.c {
                Some(c) if c.len() != meta.n || c.iter().any(|v| !v.is_finite()) => {
                    return err("c must be finite with length n".into());
                }
                None if s.x.len() != meta.n => return err("c is required when x is not a cost vector".into()),
                _ => {}
            }
            if let Some(gt) = &meta.ground_truth {
                if !gt.is_feasible(&s.y_star) {
                    return err("y violates the ground-truth constraints".into());
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self, config: Option<&serde_json::Value>) -> Result<String> {
        let file = DatasetFile {
            format_version: DATASET_FORMAT_VERSION,
            config: config.cloned(),
            meta: self.meta.clone(),
            samples: self.samples.clone(),
        };
        serde_json::to_string(&file).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text).map_err(|e| json_error(text, &e))?;
        if file.format_version != DATASET_FORMAT_VERSION {
            return Err(Error::Parse {
                offset: 0,
                msg: format!("unsupported format_version {}", file.format_version),
            });
        }
        let ds = Dataset { meta: file.meta, samples: file.samples };
        ds.validate()?;
        Ok(ds)
    }
}

/// Converts a serde_json error position (line, column) into a byte offset.
pub(crate) fn json_error(text: &str, e: &serde_json::Error) -> Error {
    let (line, col) = (e.line(), e.column());
    let offset = if line == 0 {
        0
    } else {
        let start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
        (start + col.saturating_sub(1)).min(text.len())
    };
    Error::Parse { offset, msg: e.to_string() }
}

pub fn save_dataset(path: &Path, ds: &Dataset, config: Option<&serde_json::Value>) -> Result<()> {
    std::fs::write(path, ds.to_json(config)?)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_json(&std::fs::read_to_string(path)?)
}

/// Exact optimum of `min c·z` over `rows` inside `bounds`, using enumeration
/// when the box is small enough and branch-and-bound otherwise.
pub(crate) fn solve_rows(c: &[f64], rows: &[Row], bounds: &IntBox) -> Result<crate::solver::SolveResult> {
    let inst = crate::solver::IlpInstance::from_rows(c.to_vec(), rows, bounds.clone())?;
    crate::solver::solve_auto(&inst)
}
