//! A trained model: learned rows, known rows, and where the cost comes from.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{check_dim, Error, Result};
use crate::polytope::{LearnablePolytope, Row};
use crate::rng::rng_from;
use crate::solver::IlpInstance;

/// `c = W x + bias` with `W` of shape `n x p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCostBackbone {
    pub w: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// Gradients of a loss with respect to the backbone parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneGrad {
    pub w: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl BackboneGrad {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self { w: vec![vec![0.0; p]; n], bias: vec![0.0; n] }
    }

    pub fn add_scaled(&mut self, other: &BackboneGrad, alpha: f64) {
        for (row, orow) in self.w.iter_mut().zip(&other.w) {
            crate::linalg::axpy(alpha, orow, row);
        }
        crate::linalg::axpy(alpha, &other.bias, &mut self.bias);
    }

    pub fn norm_sq(&self) -> f64 {
        self.w.iter().flatten().chain(&self.bias).map(|v| v * v).sum()
    }
}

impl LinearCostBackbone {
    pub fn new(w: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        check_dim(w.len(), bias.len())?;
        let p = w.first().map_or(0, Vec::len);
        for row in &w {
            check_dim(p, row.len())?;
        }
        let b = Self { w, bias };
        if !b.is_finite() {
            return Err(Error::invalid("backbone parameters must be finite"));
        }
        Ok(b)
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        Self { w: vec![vec![0.0; p]; n], bias: vec![0.0; n] }
    }

    pub fn identity(n: usize) -> Self {
        let w = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self { w, bias: vec![0.0; n] }
    }

    /// Entries of `W` from `N(0, scale^2)`, zero bias.
    pub fn random(n: usize, p: usize, scale: f64, seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let w = (0..n).map(|_| (0..p).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        Self { w, bias: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.bias.len()
    }

    pub fn p(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().flatten().chain(&self.bias).all(|v| v.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.p(), x.len())?;
        Ok(self.w.iter().zip(&self.bias).map(|(row, b)| crate::linalg::dot(row, x) + b).collect())
    }

    /// Chain rule through `c = W x + bias`: `dL/dW = g x^T`, `dL/dbias = g`.
    pub fn backward(&self, x: &[f64], grad_c: &[f64]) -> Result<BackboneGrad> {
        check_dim(self.p(), x.len())?;
        check_dim(self.n(), grad_c.len())?;
        let w = grad_c.iter().map(|g| x.iter().map(|xi| g * xi).collect()).collect();
        Ok(BackboneGrad { w, bias: grad_c.to_vec() })
    }

    pub fn forward_backward(&self, x: &[f64], grad_c: &[f64]) -> Result<(Vec<f64>, BackboneGrad)> {
        Ok((self.forward(x)?, self.backward(x, grad_c)?))
    }
}

/// Source of the cost vector at solve time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSource {
    /// The sample's stored cost, or `-x` when absent.
    Given,
    Linear { backbone: LinearCostBackbone },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub polytope: LearnablePolytope,
    /// Known constraints that are not trained.
    #[serde(default)]
    pub fixed_rows: Vec<Row>,
    pub cost: CostSource,
}

impl Model {
    pub fn new(polytope: LearnablePolytope) -> Self {
        Self { polytope, fixed_rows: Vec::new(), cost: CostSource::Given }
    }

    pub fn cost_for(&self, sample: &Sample) -> Result<Vec<f64>> {
        match &self.cost {
            CostSource::Given => Ok(sample.cost()),
            CostSource::Linear { backbone } => backbone.forward(&sample.x),
        }
    }

    /// All solve-time rows: learned rows followed by the fixed ones.
    pub fn rows(&self) -> Vec<Row> {
        let mut rows = self.polytope.rows();
        rows.extend(self.fixed_rows.iter().cloned());
        rows
    }

    pub fn instance(&self, sample: &Sample) -> Result<IlpInstance> {
        self.instance_with_rows(sample, &self.rows())
    }

    pub(crate) fn instance_with_rows(&self, sample: &Sample, rows: &[Row]) -> Result<IlpInstance> {
        IlpInstance::from_rows(self.cost_for(sample)?, rows, self.polytope.bounds().clone())
    }

    /// Feasibility of `z` under all solve-time rows with the solver tolerance.
    pub fn admits(&self, z: &[i64]) -> bool {
        self.polytope.bounds().contains(z)
            && self.rows().iter().all(|r| crate::linalg::dot_int(&r.a, z) + r.b >= -crate::solver::FEAS_TOL)
    }
}
