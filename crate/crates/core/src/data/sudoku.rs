use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta, Family, GroundTruth, Sample};
use crate::error::{Error, Result};
use crate::polytope::IntBox;
use crate::rng::{stream_rng, Rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SudokuConfig {
    pub k: usize,
    pub train: usize,
    pub test: usize,
    pub seed: u64,
}

/// Block height and width for a `k x k` board.
fn block_shape(k: usize) -> Result<(usize, usize)> {
    match k {
        4 => Ok((2, 2)),
        6 => Ok((2, 3)),
        9 => Ok((3, 3)),
        _ => Err(Error::invalid(format!("unsupported sudoku size {k}; use 4, 6 or 9"))),
    }
}

/// Variable index of "cell (r, c) holds digit d" (digits `0..k`).
#[inline]
fn var(k: usize, r: usize, c: usize, d: usize) -> usize {
    (r * k + c) * k + d
}

/// The `4k^2` equality rows (cell, row, column and block sums equal one).
pub fn sudoku_equalities(k: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (bh, bw) = block_shape(k)?;
    let n = k * k * k;
    let mut rows = Vec::with_capacity(4 * k * k);
    let mut push = |cells: &mut dyn Iterator<Item = usize>| {
        let mut a = vec![0.0; n];
        for j in cells {
            a[j] = 1.0;
        }
        rows.push(a);
    };
    for r in 0..k {
        for c in 0..k {
            push(&mut (0..k).map(|d| var(k, r, c, d)));
        }
    }
    for r in 0..k {
        for d in 0..k {
            push(&mut (0..k).map(|c| var(k, r, c, d)));
        }
    }
    for c in 0..k {
        for d in 0..k {
            push(&mut (0..k).map(|r| var(k, r, c, d)));
        }
    }
    for b in 0..k {
        let (r0, c0) = ((b / (k / bw)) * bh, (b % (k / bw)) * bw);
        for d in 0..k {
            push(&mut (0..k).map(|i| var(k, r0 + i / bw, c0 + i % bw, d)));
        }
    }
    let len = rows.len();
    Ok((rows, vec![1.0; len]))
}

struct Board {
    k: usize,
    bh: usize,
    bw: usize,
    cells: Vec<Option<usize>>,
    row: Vec<u32>,
    col: Vec<u32>,
    block: Vec<u32>,
}

impl Board {
    fn new(k: usize) -> Result<Self> {
        let (bh, bw) = block_shape(k)?;
        Ok(Self { k, bh, bw, cells: vec![None; k * k], row: vec![0; k], col: vec![0; k], block: vec![0; k] })
    }

    fn block_of(&self, r: usize, c: usize) -> usize {
        (r / self.bh) * (self.k / self.bw) + c / self.bw
    }

    fn allowed(&self, cell: usize, d: usize) -> bool {
        let (r, c) = (cell / self.k, cell % self.k);
        let bit = 1 << d;
        (self.row[r] | self.col[c] | self.block[self.block_of(r, c)]) & bit == 0
    }

    fn set(&mut self, cell: usize, d: Option<usize>) {
        let (r, c) = (cell / self.k, cell % self.k);
        let b = self.block_of(r, c);
        if let Some(old) = self.cells[cell] {
            let mask = !(1u32 << old);
            self.row[r] &= mask;
            self.col[c] &= mask;
            self.block[b] &= mask;
        }
        if let Some(d) = d {
            let bit = 1u32 << d;
            self.row[r] |= bit;
            self.col[c] |= bit;
            self.block[b] |= bit;
        }
        self.cells[cell] = d;
    }

    /// Fills the empty cells in order, trying digits as listed by `order`.
    fn fill(&mut self, cell: usize, order: &mut dyn FnMut(usize) -> Vec<usize>) -> bool {
        if cell == self.cells.len() {
            return true;
        }
        if self.cells[cell].is_some() {
            return self.fill(cell + 1, order);
        }
        for d in order(cell) {
            if self.allowed(cell, d) {
                self.set(cell, Some(d));
                if self.fill(cell + 1, order) {
                    return true;
                }
                self.set(cell, None);
            }
        }
        false
    }
}

/// A complete valid board (digits `0..k` per cell, row-major) from randomized backtracking.
pub fn random_board(k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let mut board = Board::new(k)?;
    let mut order = |_: usize| {
        let mut ds: Vec<usize> = (0..k).collect();
        ds.shuffle(rng);
        ds
    };
    if !board.fill(0, &mut order) {
        return Err(Error::Generation("backtracking found no board".into()));
    }
    Ok(board.cells.iter().map(|d| d.expect("filled")).collect())
}

/// The completion of `givens` whose one-hot encoding is lexicographically
/// smallest, or `None` if the givens admit no completion.
///
/// Cells are filled in order and the largest digit is tried first, since a
/// one-hot block with its 1 further right is smaller.
pub fn canonical_completion(k: usize, givens: &[Option<usize>]) -> Result<Option<Vec<usize>>> {
    let mut board = Board::new(k)?;
    if givens.len() != k * k {
        return Err(Error::DimensionMismatch { expected: k * k, got: givens.len() });
    }
    for (cell, g) in givens.iter().enumerate() {
        if let Some(d) = *g {
            if d >= k || !board.allowed(cell, d) {
                return Ok(None);
            }
            board.set(cell, Some(d));
        }
    }
    let mut order = |_: usize| -> Vec<usize> { (0..k).rev().collect() };
    if !board.fill(0, &mut order) {
        return Ok(None);
    }
    Ok(Some(board.cells.iter().map(|d| d.expect("filled")).collect()))
}

fn one_hot(k: usize, cells: &[Option<usize>]) -> Vec<f64> {
    let mut v = vec![0.0; k * k * k];
    for (cell, d) in cells.iter().enumerate() {
        if let Some(d) = d {
            v[cell * k + d] = 1.0;
        }
    }
    v
}

/// Number of blanks drawn uniformly among the counts between 30% and 70% of the cells.
fn mask_count(cells: usize, rng: &mut Rng) -> usize {
    let lo = (3 * cells).div_ceil(10);
    let hi = 7 * cells / 10;
    rng.gen_range(lo..=hi)
}

fn puzzle(k: usize, rng: &mut Rng) -> Result<Sample> {
    let board = random_board(k, rng)?;
    let cells = k * k;
    let blanks = mask_count(cells, rng);
    let mut idx: Vec<usize> = (0..cells).collect();
    idx.shuffle(rng);
    let mut givens: Vec<Option<usize>> = board.iter().map(|&d| Some(d)).collect();
    for &i in &idx[..blanks] {
        givens[i] = None;
    }
    let solution = canonical_completion(k, &givens)?.expect("the source board completes its own givens");
    let full: Vec<Option<usize>> = solution.into_iter().map(Some).collect();
    let y_star = one_hot(k, &full).into_iter().map(|v| v as i64).collect();
    Ok(Sample { x: one_hot(k, &givens), y_star, c: None })
}

/// Symbolic sudoku puzzles. Inputs one-hot encode the givens (blank cells are
/// all zero), the cost is `-x`, and the label is the canonical completion.
pub fn gen_sudoku(cfg: &SudokuConfig) -> Result<(Dataset, Dataset)> {
    let k = cfg.k;
    let (eq_a, eq_b) = sudoku_equalities(k)?;
    let n = k * k * k;
    let meta = DatasetMeta {
        n,
        bounds: IntBox::binary(n),
        family: Family::Sudoku,
        ground_truth: Some(GroundTruth { a: vec![], b: vec![], m_prime: eq_a.len(), eq_a, eq_b }),
        seed: cfg.seed,
        params: serde_json::to_value(cfg).unwrap_or_default(),
    };
    let train: Vec<Sample> = (0..cfg.train as u64)
        .map(|i| puzzle(k, &mut stream_rng(cfg.seed, Stream::Data, &[0, i])))
        .collect::<Result<_>>()?;
    let seen: HashSet<Vec<u64>> = train.iter().map(|s| s.x.iter().map(|v| v.to_bits()).collect()).collect();
    let mut test = Vec::with_capacity(cfg.test);
    let mut i = 0u64;
    while test.len() < cfg.test {
        let s = puzzle(k, &mut stream_rng(cfg.seed, Stream::Data, &[1, i]))?;
        i += 1;
        if i > 1000 * (cfg.test as u64 + 1) {
            return Err(Error::Generation("could not draw enough puzzles unseen in training".into()));
        }
        if !seen.contains(&s.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()) {
            test.push(s);
        }
    }
    Ok((Dataset { meta: meta.clone(), samples: train }, Dataset { meta, samples: test }))
}

/// Fraction of blank cells in a sample's input.
pub fn blank_fraction(k: usize, x: &[f64]) -> f64 {
    let cells = k * k;
    let given = x.iter().filter(|v| **v != 0.0).count();
    (cells - given) as f64 / cells as f64
}
