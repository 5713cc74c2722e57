//! The training loop: minibatches, negative assembly, weighted margin losses,
//! Adam updates, temperature annealing, validation and early stopping.

mod adam;
mod snapshot;

pub use adam::{adam_step, AdamState, ADAM_EPS, BETA1, BETA2};
pub use snapshot::{Snapshot, SNAPSHOT_FORMAT_VERSION};

pub use crate::model::{BackboneGrad, LinearCostBackbone};

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Family, Sample};
use crate::error::{Error, Result};
use crate::linalg::dot_int;
use crate::loss::{
    cov_weights, covariance_loss_and_grad, sample_terms, CovStats, Gradients, Lambdas, LossHyper,
    TAU_FLOOR,
};
use crate::model::{CostSource, Model};
use crate::polytope::{init_equalities, init_polytope, InitScheme, IntBox, LearnablePolytope, Row, DEFAULT_EPSILON};
use crate::rng::{derive_seed, stream_rng, stream_seed, Stream};
use crate::sampler::{assemble_negatives, khop_negatives, BatchContext, SamplerConfig, SolverContext};
use crate::solver::{evaluate, tie_tol, Backend, BnbOptions, EvalOptions, FEAS_TOL};

/// How the three loss terms are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Weights proportional to each term's coefficient of variation.
    #[default]
    Cov,
    /// Fixed weights of 1/3.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub tau0: f64,
    pub tau_factor: f64,
    /// Learning-rate multiplier applied whenever the temperature is annealed.
    pub lr_factor: f64,
    /// Validations without improvement before the temperature is annealed.
    pub plateau_patience: usize,
    /// Validations without a new best snapshot before training stops.
    pub early_stop_patience: usize,
    pub mu_pos: f64,
    pub mu_neg: f64,
    pub wall_clock_limit_s: Option<f64>,
    pub seed: u64,
    /// Global gradient norm cap.
    pub clip_norm: f64,
    /// Steps with uniform loss weights before CoV weighting starts.
    pub cov_warmup: u64,
    /// Validation samples solved exactly; the rest only get the fast check.
    pub full_val_samples: usize,
    /// Branch-and-bound node cap per validation solve.
    pub val_node_limit: usize,
    pub jobs: usize,
    /// Independent initializations; the one with the best validation score is kept.
    pub restarts: usize,
    pub weighting: Weighting,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            batch_size: 32,
            max_epochs: 150,
            tau0: 1.0,
            tau_factor: 0.1,
            lr_factor: 1.0,
            plateau_patience: 10,
            early_stop_patience: 30,
            mu_pos: 0.01,
            mu_neg: 0.01,
            wall_clock_limit_s: None,
            seed: 0,
            clip_norm: 10.0,
            cov_warmup: crate::loss::DEFAULT_WARMUP,
            full_val_samples: 100,
            val_node_limit: 20_000,
            jobs: 1,
            restarts: 1,
            weighting: Weighting::Cov,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.lr > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.tau0 > 0.0
            && self.plateau_patience > 0
            && self.early_stop_patience > 0
            && self.mu_pos > 0.0
            && self.mu_neg > 0.0
            && self.clip_norm > 0.0
            && self.val_node_limit > 0
            && self.restarts > 0
            && self.wall_clock_limit_s.is_none_or(|t| t > 0.0);
        if !positive {
            return Err(Error::Config("training parameters must be positive".into()));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor <= 1.0) {
            return Err(Error::Config(format!("lr_factor must lie in (0, 1], got {}", self.lr_factor)));
        }
        if !(self.tau_factor > 0.0 && self.tau_factor < 1.0) {
            return Err(Error::Config(format!("tau_factor must lie in (0, 1), got {}", self.tau_factor)));
        }
        Ok(())
    }
}

/// Step size scaled to the box: 0.01 per unit of the widest coordinate range.
/// A normal-vector error moves the learned facet in proportion to the
/// coordinate magnitudes, so wider boxes need finer steps.
pub fn default_lr(bounds: &IntBox) -> f64 {
    let width = bounds.lo.iter().zip(&bounds.hi).map(|(l, h)| h - l).max().unwrap_or(1).max(1);
    0.01 / width as f64
}

/// Which constraint rows are learned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSpec {
    None,
    Inequalities { m: usize },
    /// `m` tied equality pairs (`2m` rows).
    Equalities { m: usize },
}

/// What is learned and how negatives are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub constraints: ConstraintSpec,
    pub init: InitScheme,
    pub epsilon: f64,
    /// Learn a linear cost backbone instead of using the sample cost.
    pub learn_cost: bool,
    /// Known rows used at solve time and to discard impossible negatives.
    #[serde(default)]
    pub fixed_rows: Vec<Row>,
    pub sampler: SamplerConfig,
}

impl TaskSpec {
    /// The default task for a dataset family: `2m'` inequalities for random
    /// polyhedra, `ceil((n+1)/2)` tied equalities for sudoku, and a learned
    /// cost over the known group rows for the cost task.
    pub fn for_dataset(ds: &Dataset) -> Result<Self> {
        let n = ds.meta.n;
        let gt = ds.meta.ground_truth.as_ref();
        let khop = SamplerConfig::default();
        Ok(match ds.meta.family {
            Family::RandomConstraintsBinary | Family::RandomConstraintsDense => {
                let m_prime = gt.map_or(1, |g| g.m_prime);
                TaskSpec {
                    constraints: ConstraintSpec::Inequalities { m: 2 * m_prime },
                    init: InitScheme::Uniform,
                    epsilon: DEFAULT_EPSILON,
                    learn_cost: false,
                    fixed_rows: vec![],
                    sampler: SamplerConfig { use_projection: true, use_batch: true, use_solver: true, ..SamplerConfig::default() },
                }
            }
            Family::Sudoku => TaskSpec {
                constraints: ConstraintSpec::Equalities { m: (n + 1).div_ceil(2) },
                init: InitScheme::Uniform,
                epsilon: DEFAULT_EPSILON,
                learn_cost: false,
                fixed_rows: vec![],
                sampler: khop,
            },
            Family::ToyCost => TaskSpec {
                constraints: ConstraintSpec::None,
                init: InitScheme::Uniform,
                epsilon: DEFAULT_EPSILON,
                learn_cost: true,
                fixed_rows: gt
                    .ok_or_else(|| Error::Config("cost task needs the known group rows in the dataset".into()))?
                    .rows(),
                sampler: SamplerConfig { use_khop: false, use_batch: true, ..SamplerConfig::default() },
            },
        })
    }
}

/// Multiplies `tau` by `factor` once the metric has gone `patience`
/// validations (counting the reference one) without a strict improvement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauTracker {
    pub patience: usize,
    pub history: Vec<f64>,
    /// Start of the window considered for the next plateau.
    pub window_start: usize,
    pub anneals: usize,
}

impl PlateauTracker {
    pub fn new(patience: usize) -> Self {
        Self { patience: patience.max(1), history: Vec::new(), window_start: 0, anneals: 0 }
    }
}

/// Records `metric` and returns the (possibly annealed) temperature, floored at `TAU_FLOOR`.
pub fn anneal_tau(tau: f64, factor: f64, tracker: &mut PlateauTracker, metric: f64) -> f64 {
    tracker.history.push(metric);
    let len = tracker.history.len();
    let p = tracker.patience;
    if len - tracker.window_start < p {
        return tau;
    }
    let first = len - p;
    let reference = tracker.history[..=first].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if tracker.history[first + 1..].iter().all(|&v| v <= reference) {
        tracker.window_start = len - 1;
        tracker.anneals += 1;
        return (tau * factor).max(TAU_FLOOR);
    }
    tau
}

/// Validation metrics: fraction passing the fast check and exact-solve accuracy on the solved subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValMetrics {
    pub fast: f64,
    pub full: f64,
}

impl ValMetrics {
    fn beats(&self, other: &ValMetrics) -> bool {
        self.full > other.full || (self.full == other.full && self.fast > other.fast)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub epoch: usize,
    pub metrics: ValMetrics,
    /// Mean `L+ + L-` over the epoch.
    pub train_loss: f64,
    pub model: Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub model: Model,
    pub adam: AdamState,
    /// Current learning rate; starts at the configured one and follows the anneals.
    pub lr: f64,
    pub tau: f64,
    pub cov: CovStats,
    pub plateau: PlateauTracker,
    /// Next epoch to run.
    pub epoch: usize,
    pub step: u64,
    pub since_best: usize,
    pub best: Option<BestRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    Step {
        step: u64,
        epoch: usize,
        l_pos: f64,
        l_neg: f64,
        l_cov: f64,
        lambdas: Lambdas,
        tau: f64,
        negatives: usize,
        elapsed_s: f64,
    },
    /// Start of an independent initialization.
    Restart {
        restart: usize,
    },
    Validation {
        step: u64,
        epoch: usize,
        fast: f64,
        full: f64,
        train_loss: f64,
        tau: f64,
        best: bool,
        elapsed_s: f64,
    },
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Best snapshot by validation, or the final model if no validation ran.
    pub model: Model,
    pub state: TrainState,
    pub log: Vec<LogRecord>,
    pub truncated: bool,
    pub epochs_run: usize,
    pub elapsed_s: f64,
}

/// Fresh training state for a task.
pub fn init_state(cfg: &TrainConfig, task: &TaskSpec, train: &Dataset) -> Result<TrainState> {
    init_state_for_restart(cfg, task, train, 0)
}

/// Fresh training state whose parameters are drawn for restart number `restart`.
pub fn init_state_for_restart(cfg: &TrainConfig, task: &TaskSpec, train: &Dataset, restart: usize) -> Result<TrainState> {
    let n = train.meta.n;
    let bounds = train.meta.bounds.clone();
    let base = stream_seed(cfg.seed, Stream::Init);
    let init_seed = if restart == 0 { base } else { derive_seed(base, &[0x7265_7374, restart as u64]) };
    let polytope = match task.constraints {
        ConstraintSpec::None => LearnablePolytope::empty(bounds, task.epsilon)?,
        ConstraintSpec::Inequalities { m } => init_polytope(m, n, task.init, bounds, task.epsilon, init_seed)?,
        ConstraintSpec::Equalities { m } => init_equalities(m, n, task.init, bounds, task.epsilon, init_seed)?,
    };
    let cost = if task.learn_cost {
        let p = train.samples.first().map_or(n, |s| s.x.len());
        let scale = 0.1 / (p as f64).sqrt();
        CostSource::Linear { backbone: LinearCostBackbone::random(n, p, scale, derive_seed(init_seed, &[1])) }
    } else {
        CostSource::Given
    };
    let model = Model { polytope, fixed_rows: task.fixed_rows.clone(), cost };
    let len = flatten(&model).len();
    Ok(TrainState {
        model,
        adam: AdamState::new(len),
        lr: cfg.lr,
        tau: cfg.tau0,
        cov: CovStats::new(cfg.cov_warmup),
        plateau: PlateauTracker::new(cfg.plateau_patience),
        epoch: 0,
        step: 0,
        since_best: 0,
        best: None,
    })
}

/// Learnable parameters in a fixed order: per unit `a`, `r`, `o`, then the backbone.
pub fn flatten(model: &Model) -> Vec<f64> {
    let mut out = Vec::new();
    for h in model.polytope.units() {
        out.extend_from_slice(&h.a);
        out.push(h.r);
        out.extend_from_slice(&h.o);
    }
    if let CostSource::Linear { backbone } = &model.cost {
        out.extend(backbone.w.iter().flatten());
        out.extend_from_slice(&backbone.bias);
    }
    out
}

pub fn unflatten(model: &mut Model, flat: &[f64]) {
    let mut it = flat.iter().copied();
    for h in model.polytope.units_mut() {
        h.a.iter_mut().for_each(|v| *v = it.next().expect("flat length"));
        h.r = it.next().expect("flat length");
        h.o.iter_mut().for_each(|v| *v = it.next().expect("flat length"));
    }
    if let CostSource::Linear { backbone } = &mut model.cost {
        backbone.w.iter_mut().flatten().for_each(|v| *v = it.next().expect("flat length"));
        backbone.bias.iter_mut().for_each(|v| *v = it.next().expect("flat length"));
    }
}

fn flatten_grads(g: &Gradients, bb: Option<&BackboneGrad>) -> Vec<f64> {
    let mut out = Vec::new();
    for u in &g.units {
        out.extend_from_slice(&u.a);
        out.push(u.r);
        out.extend_from_slice(&u.o);
    }
    if let Some(bb) = bb {
        out.extend(bb.w.iter().flatten());
        out.extend_from_slice(&bb.bias);
    }
    out
}

/// Boxes up to this many points are solved by enumeration during training.
const ENUMERATE_UP_TO: f64 = 4096.0;

/// Exact backend for a box: enumeration when cheap, otherwise node-capped branch-and-bound.
pub fn backend_for(bounds: &crate::polytope::IntBox, node_limit: usize) -> Backend {
    if bounds.num_points() <= ENUMERATE_UP_TO {
        Backend::Exhaustive
    } else {
        Backend::Bnb(BnbOptions::with_node_limit(node_limit))
    }
}

fn admits_fixed(rows: &[Row], z: &[i64]) -> bool {
    rows.iter().all(|r| dot_int(&r.a, z) + r.b >= -FEAS_TOL)
}

/// Whether the label is feasible under the model and is not beaten in cost
/// by any feasible k-hop neighbour. Passing is necessary for an exact solve
/// to return the label.
fn fast_check(model: &Model, rows: &[Row], sample: &Sample, seed: u64) -> Result<bool> {
    let bounds = model.polytope.bounds();
    let n = bounds.dim();
    let feasible = |z: &[i64]| bounds.contains(z) && admits_fixed(rows, z);
    if !feasible(&sample.y_star) {
        return Ok(false);
    }
    let c = model.cost_for(sample)?;
    let own = dot_int(&c, &sample.y_star);
    let slack = 2.0 * tie_tol(own);
    for k in 1..=4 {
        for z in khop_negatives(&sample.y_star, k, n, bounds, derive_seed(seed, &[k as u64]))? {
            if feasible(&z) && dot_int(&c, &z) < own - slack {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn fast_checks(model: &Model, samples: &[Sample], seed: u64) -> Result<Vec<bool>> {
    let rows = model.rows();
    samples.iter().enumerate().map(|(i, s)| fast_check(model, &rows, s, derive_seed(seed, &[i as u64]))).collect()
}

/// Fraction of samples passing the fast check: the label is feasible and no
/// sampled feasible k-hop neighbour beats it in cost.
pub fn fast_validation(model: &Model, samples: &[Sample], seed: u64) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let pass = fast_checks(model, samples, seed)?.iter().filter(|p| **p).count();
    Ok(pass as f64 / samples.len() as f64)
}

/// Fast check on all validation samples and exact solves (warm-started at
/// the label) on the first `cfg.full_val_samples`. Samples that fail the
/// fast check cannot be solved correctly and are not sent to the solver.
pub fn validate_model(model: &Model, val: &Dataset, cfg: &TrainConfig) -> Result<ValMetrics> {
    if val.is_empty() {
        return Ok(ValMetrics { fast: 0.0, full: 0.0 });
    }
    let checks = fast_checks(model, &val.samples, stream_seed(cfg.seed, Stream::Sampler) ^ 0x0076_616c)?;
    let fast = checks.iter().filter(|p| **p).count() as f64 / val.len() as f64;
    let k = cfg.full_val_samples.min(val.len());
    let full = if k == 0 {
        fast
    } else {
        let candidates: Vec<Sample> =
            val.samples[..k].iter().zip(&checks).filter(|(_, p)| **p).map(|(s, _)| s.clone()).collect();
        let correct = if candidates.is_empty() {
            0
        } else {
            let backend = backend_for(model.polytope.bounds(), cfg.val_node_limit);
            evaluate(model, &candidates, &backend, &EvalOptions { warm_start: true, jobs: cfg.jobs })?.correct
        };
        correct as f64 / k as f64
    };
    Ok(ValMetrics { fast, full })
}

struct BatchResult {
    l_pos: f64,
    l_neg: f64,
    l_cov: f64,
    lambdas: Lambdas,
    negatives: usize,
}

fn train_batch(
    state: &mut TrainState,
    cfg: &TrainConfig,
    task: &TaskSpec,
    train: &Dataset,
    batch: &[usize],
    epoch: usize,
) -> Result<BatchResult> {
    let hyper = LossHyper::new(cfg.mu_pos, cfg.mu_neg, state.tau.max(TAU_FLOOR))?;
    let model = &state.model;
    let poly = &model.polytope;
    let labels: Vec<Vec<i64>> = batch.iter().map(|&i| train.samples[i].y_star.clone()).collect();
    let solver_rows = task.sampler.use_solver.then(|| model.rows());
    let solver_backend = backend_for(poly.bounds(), cfg.val_node_limit);
    let sampler_seed = stream_seed(cfg.seed, Stream::Sampler);

    let mut g_pos = Gradients::zeros_like(poly);
    let mut g_neg = Gradients::zeros_like(poly);
    let mut bb_grad = match &model.cost {
        CostSource::Linear { backbone } => Some(BackboneGrad::zeros(backbone.n(), backbone.p())),
        CostSource::Given => None,
    };
    let (mut lp_sum, mut ln_sum, mut ln_count, mut neg_total) = (0.0, 0.0, 0usize, 0usize);
    for (bi, &idx) in batch.iter().enumerate() {
        let s = &train.samples[idx];
        let c = model.cost_for(s)?;
        let inst = match &solver_rows {
            Some(rows) => Some(model.instance_with_rows(s, rows)?),
            None => None,
        };
        let mut negs = assemble_negatives(
            &task.sampler,
            &s.y_star,
            poly,
            Some(BatchContext { labels: &labels, index: bi }),
            inst.as_ref().map(|instance| SolverContext { instance, backend: &solver_backend }),
            derive_seed(sampler_seed, &[epoch as u64, idx as u64]),
        )?;
        negs.retain(|z| admits_fixed(&model.fixed_rows, z));
        let terms = sample_terms(poly, &c, &s.y_star, &negs, &hyper)?;
        lp_sum += terms.l_pos;
        g_pos.add_scaled(&terms.grad_pos, 1.0);
        neg_total += terms.num_negatives;
        if let Some(l) = terms.l_neg {
            ln_sum += l;
            ln_count += 1;
            g_neg.add_scaled(&terms.grad_neg, 1.0);
            if let (Some(acc), CostSource::Linear { backbone }) = (bb_grad.as_mut(), &model.cost) {
                acc.add_scaled(&backbone.backward(&s.x, &terms.grad_neg.cost)?, 1.0);
            }
        }
    }
    let bsz = batch.len() as f64;
    let l_pos = lp_sum / bsz;
    let l_neg = if ln_count > 0 { ln_sum / ln_count as f64 } else { 0.0 };
    let (l_cov, g_cov) = covariance_loss_and_grad(poly);
    state.cov.observe(l_pos, l_neg, l_cov);
    let lambdas = match cfg.weighting {
        Weighting::Cov => cov_weights(&state.cov),
        Weighting::Uniform => Lambdas::UNIFORM,
    };

    let neg_scale = if ln_count > 0 { lambdas.neg / ln_count as f64 } else { 0.0 };
    let mut total = Gradients::zeros_like(poly);
    total.add_scaled(&g_pos, lambdas.pos / bsz);
    total.add_scaled(&g_neg, neg_scale);
    total.add_scaled(&g_cov, lambdas.cov);
    if let Some(bb) = bb_grad.as_mut() {
        let mut scaled = BackboneGrad::zeros(bb.bias.len(), bb.w.first().map_or(0, Vec::len));
        scaled.add_scaled(bb, neg_scale);
        *bb = scaled;
    }
    let mut flat_g = flatten_grads(&total, bb_grad.as_ref());
    if let Some(i) = flat_g.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(None, format!("non-finite gradient at parameter {i}")));
    }
    let norm = flat_g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > cfg.clip_norm {
        let f = cfg.clip_norm / norm;
        flat_g.iter_mut().for_each(|v| *v *= f);
    }
    let mut params = flatten(&state.model);
    adam_step(&mut params, &flat_g, &mut state.adam, state.lr)?;
    unflatten(&mut state.model, &params);
    state.step += 1;
    Ok(BatchResult { l_pos, l_neg, l_cov, lambdas, negatives: neg_total })
}

/// Trains on `train`, validating on `val` after every epoch. Resumes from
/// `resume` when given; otherwise runs `cfg.restarts` independent
/// initializations and keeps the one with the best validation record.
/// Within a run the best snapshot is chosen by exact-solve validation
/// accuracy (ties: fast-check rate, then lower training loss).
pub fn fit(cfg: &TrainConfig, train: &Dataset, val: &Dataset, task: &TaskSpec, resume: Option<TrainState>) -> Result<FitOutcome> {
    cfg.validate()?;
    task.sampler.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if train.meta.n != val.meta.n {
        return Err(Error::DimensionMismatch { expected: train.meta.n, got: val.meta.n });
    }
    let start = Instant::now();
    if let Some(state) = resume {
        if state.adam.m.len() != flatten(&state.model).len() {
            return Err(Error::Config("optimizer state does not match the model".into()));
        }
        return run(cfg, train, val, task, state, &start, Vec::new());
    }
    let mut chosen: Option<FitOutcome> = None;
    let mut log = Vec::new();
    for restart in 0..cfg.restarts {
        if cfg.restarts > 1 {
            log.push(LogRecord::Restart { restart });
        }
        let state = init_state_for_restart(cfg, task, train, restart)?;
        let mut out = run(cfg, train, val, task, state, &start, std::mem::take(&mut log))?;
        let better = match (&chosen, &out.state.best, chosen.as_ref().and_then(|c| c.state.best.as_ref())) {
            (None, _, _) => true,
            (Some(_), Some(b), Some(cb)) => {
                b.metrics.beats(&cb.metrics) || (b.metrics == cb.metrics && b.train_loss < cb.train_loss)
            }
            (Some(_), Some(_), None) => true,
            (Some(_), None, _) => false,
        };
        let truncated = out.truncated;
        log = std::mem::take(&mut out.log);
        if better {
            chosen = Some(out);
        }
        if truncated {
            break;
        }
    }
    let mut out = chosen.expect("at least one restart");
    out.log = log;
    out.elapsed_s = start.elapsed().as_secs_f64();
    Ok(out)
}

fn run(
    cfg: &TrainConfig,
    train: &Dataset,
    val: &Dataset,
    task: &TaskSpec,
    mut state: TrainState,
    start: &Instant,
    mut log: Vec<LogRecord>,
) -> Result<FitOutcome> {
    let out_of_time = |start: &Instant| cfg.wall_clock_limit_s.is_some_and(|t| start.elapsed().as_secs_f64() > t);
    let mut truncated = false;
    let first_epoch = state.epoch;

    while state.epoch < cfg.max_epochs {
        let epoch = state.epoch;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut stream_rng(cfg.seed, Stream::Training, &[epoch as u64]));
        let mut margin_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let r = train_batch(&mut state, cfg, task, train, batch, epoch)?;
            margin_sum += r.l_pos + r.l_neg;
            batches += 1;
            log.push(LogRecord::Step {
                step: state.step,
                epoch,
                l_pos: r.l_pos,
                l_neg: r.l_neg,
                l_cov: r.l_cov,
                lambdas: r.lambdas,
                tau: state.tau,
                negatives: r.negatives,
                elapsed_s: start.elapsed().as_secs_f64(),
            });
            if out_of_time(start) {
                truncated = true;
                break;
            }
        }
        if truncated {
            break;
        }
        state.epoch += 1;
        let train_loss = margin_sum / batches.max(1) as f64;
        let metrics = validate_model(&state.model, val, cfg)?;
        let is_best = match &state.best {
            None => true,
            Some(b) => metrics.beats(&b.metrics) || (metrics == b.metrics && train_loss < b.train_loss),
        };
        if is_best {
            state.best = Some(BestRecord { epoch, metrics, train_loss, model: state.model.clone() });
            state.since_best = 0;
        } else {
            state.since_best += 1;
        }
        log.push(LogRecord::Validation {
            step: state.step,
            epoch,
            fast: metrics.fast,
            full: metrics.full,
            train_loss,
            tau: state.tau,
            best: is_best,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
        log::info!(
            "epoch {epoch}: loss {train_loss:.3e}, fast {:.3}, full {:.3}, tau {:.0e}{}",
            metrics.fast,
            metrics.full,
            state.tau,
            if is_best { " *" } else { "" }
        );
        let anneals = state.plateau.anneals;
        state.tau = anneal_tau(state.tau, cfg.tau_factor, &mut state.plateau, metrics.full + 1e-3 * metrics.fast);
        if state.plateau.anneals != anneals {
            state.lr *= cfg.lr_factor;
        }
        if state.since_best >= cfg.early_stop_patience {
            break;
        }
        if out_of_time(start) {
            truncated = true;
            break;
        }
    }
    let model = state.best.as_ref().map_or_else(|| state.model.clone(), |b| b.model.clone());
    Ok(FitOutcome {
        model,
        epochs_run: state.epoch - first_epoch,
        state,
        log,
        truncated,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}
