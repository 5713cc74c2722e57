//! Constraint hyperplanes, learnable polytopes and the fixed rows around them.
//!
//! A constraint row is `a·z + b >= 0`. Learnable rows carry an extra local
//! origin `o` and radius `r`, giving the effective bias
//! `b = r - (o·a)/|a|`. Equalities are stored once and materialized as two
//! opposite rows with slack `epsilon` on both sides, so the tie between the
//! two rows can never drift.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm2};
use crate::rng::rng_from;

/// Lower limit applied to every normal norm before dividing by it.
pub const NORM_FLOOR: f64 = 1e-8;

/// Default half-width of a relaxed equality.
pub const DEFAULT_EPSILON: f64 = 0.05;

pub(crate) fn floored_norm(a: &[f64]) -> f64 {
    norm2(a).max(NORM_FLOOR)
}

/// Integer bounds `lo[i] <= z[i] <= hi[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl IntBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if let Some(i) = (0..lo.len()).find(|&i| lo[i] > hi[i]) {
            return Err(Error::invalid(format!(
                "box lower bound {} exceeds upper bound {} at dimension {i}",
                lo[i], hi[i]
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn uniform(l: i64, u: i64, n: usize) -> Result<Self> {
        Self::new(vec![l; n], vec![u; n])
    }

    pub fn binary(n: usize) -> Self {
        Self { lo: vec![0; n], hi: vec![1; n] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, z: &[i64]) -> bool {
        z.len() == self.dim() && z.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    /// Number of integer points in the box, as a float to avoid overflow.
    pub fn num_points(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l + 1) as f64).product()
    }

    pub fn clamp(&self, i: usize, v: i64) -> i64 {
        v.clamp(self.lo[i], self.hi[i])
    }

    pub fn is_valid(&self) -> bool {
        self.lo.len() == self.hi.len() && self.lo.iter().zip(&self.hi).all(|(l, h)| l <= h)
    }
}

/// A plain constraint row `a·z + b >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Row {
    pub fn slack(&self, z: &[f64]) -> f64 {
        dot(&self.a, z) + self.b
    }

    pub fn signed_distance(&self, z: &[f64]) -> f64 {
        self.slack(z) / floored_norm(&self.a)
    }
}

/// A learnable hyperplane with normal `a`, radius `r` and local origin `o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub a: Vec<f64>,
    pub r: f64,
    pub o: Vec<f64>,
}

impl Hyperplane {
    pub fn new(a: Vec<f64>, r: f64, o: Vec<f64>) -> Result<Self> {
        check_dim(a.len(), o.len())?;
        let h = Self { a, r, o };
        if !h.is_finite() {
            return Err(Error::invalid("hyperplane parameters must be finite"));
        }
        Ok(h)
    }

    /// Hyperplane `a·z + bias >= 0` with the local origin at zero.
    pub fn with_bias(a: Vec<f64>, bias: f64) -> Self {
        let o = vec![0.0; a.len()];
        Self { a, r: bias, o }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// Floored Euclidean norm of the normal.
    pub fn norm(&self) -> f64 {
        floored_norm(&self.a)
    }

    /// Effective bias `r - (o·a)/|a|`.
    pub fn bias(&self) -> f64 {
        self.r - dot(&self.o, &self.a) / self.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.r.is_finite() && self.a.iter().chain(&self.o).all(|v| v.is_finite())
    }

    pub fn signed_distance(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.dim(), z.len())?;
        Ok((dot(&self.a, z) + self.bias()) / self.norm())
    }

    pub fn to_row(&self) -> Row {
        Row { a: self.a.clone(), b: self.bias() }
    }

    /// Multiplies the normal, radius and origin by `s`; distances are unchanged for `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            a: self.a.iter().map(|v| v * s).collect(),
            r: self.r * s,
            o: self.o.iter().map(|v| v * s).collect(),
        }
    }
}

/// Free-function form of [`Hyperplane::signed_distance`].
pub fn signed_distance(z: &[f64], h: &Hyperplane) -> Result<f64> {
    h.signed_distance(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    /// One row `a·z + b >= 0`.
    Inequality,
    /// Two tied rows `a·z + b + eps >= 0` and `-a·z - b + eps >= 0`.
    Equality,
}

/// How one materialized row is derived from its stored unit:
/// `distance = (sign * (a·z + b) + slack) / |a|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowView {
    pub unit: usize,
    pub sign: f64,
    pub slack: f64,
}

/// The trainable constraint set plus its known integer box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnablePolytope {
    n: usize,
    units: Vec<Hyperplane>,
    kinds: Vec<UnitKind>,
    bounds: IntBox,
    epsilon: f64,
}

impl LearnablePolytope {
    pub fn empty(bounds: IntBox, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if !bounds.is_valid() {
            return Err(Error::invalid("invalid box"));
        }
        Ok(Self { n: bounds.dim(), units: Vec::new(), kinds: Vec::new(), bounds, epsilon })
    }

    pub fn push_inequality(&mut self, h: Hyperplane) -> Result<()> {
        self.push(h, UnitKind::Inequality)
    }

    pub fn push_equality(&mut self, h: Hyperplane) -> Result<()> {
        self.push(h, UnitKind::Equality)
    }

    fn push(&mut self, h: Hyperplane, kind: UnitKind) -> Result<()> {
        check_dim(self.n, h.dim())?;
        self.units.push(h);
        self.kinds.push(kind);
        Ok(())
    }

    pub fn extend(&mut self, other: &LearnablePolytope) -> Result<()> {
        check_dim(self.n, other.n)?;
        self.units.extend(other.units.iter().cloned());
        self.kinds.extend(other.kinds.iter().copied());
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bounds(&self) -> &IntBox {
        &self.bounds
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn units(&self) -> &[Hyperplane] {
        &self.units
    }

    /// Mutable access to the stored parameter sets. Tied rows are derived on
    /// read, so any write here keeps equality pairs consistent.
    pub fn units_mut(&mut self) -> &mut [Hyperplane] {
        &mut self.units
    }

    pub fn kinds(&self) -> &[UnitKind] {
        &self.kinds
    }

    pub fn num_units(&self) -> usize {
        self.units.len()
    }

    /// Number of materialized inequality rows (`m`).
    pub fn num_rows(&self) -> usize {
        self.kinds.iter().map(|k| if *k == UnitKind::Equality { 2 } else { 1 }).sum()
    }

    pub fn row_views(&self) -> Vec<RowView> {
        let mut views = Vec::with_capacity(self.num_rows());
        for (unit, kind) in self.kinds.iter().enumerate() {
            match kind {
                UnitKind::Inequality => views.push(RowView { unit, sign: 1.0, slack: 0.0 }),
                UnitKind::Equality => {
                    views.push(RowView { unit, sign: 1.0, slack: self.epsilon });
                    views.push(RowView { unit, sign: -1.0, slack: self.epsilon });
                }
            }
        }
        views
    }

    /// Materialized learnable rows, without the box.
    pub fn rows(&self) -> Vec<Row> {
        self.row_views()
            .into_iter()
            .map(|v| {
                let h = &self.units[v.unit];
                Row { a: h.a.iter().map(|x| v.sign * x).collect(), b: v.sign * h.bias() + v.slack }
            })
            .collect()
    }

    /// Index pairs of materialized rows that encode one relaxed equality.
    pub fn eq_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        let mut idx = 0;
        for kind in &self.kinds {
            match kind {
                UnitKind::Inequality => idx += 1,
                UnitKind::Equality => {
                    pairs.push((idx, idx + 1));
                    idx += 2;
                }
            }
        }
        pairs
    }

    pub fn box_rows(&self) -> Vec<Row> {
        box_rows_for(&self.bounds)
    }

    /// Signed distances of `z` to all materialized rows.
    pub fn distances(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, z.len())?;
        let geo: Vec<(f64, f64)> = self.units.iter().map(|h| (h.norm(), h.bias())).collect();
        Ok(self
            .row_views()
            .iter()
            .map(|v| {
                let h = &self.units[v.unit];
                let (s, b) = geo[v.unit];
                (v.sign * (dot(&h.a, z) + b) + v.slack) / s
            })
            .collect())
    }
}

/// Emits `2 * n_eq` tied rows encoding `v - eps <= U z <= v + eps`.
pub fn relax_equalities(u: &[Vec<f64>], v: &[f64], epsilon: f64, bounds: IntBox) -> Result<LearnablePolytope> {
    check_dim(u.len(), v.len())?;
    let mut poly = LearnablePolytope::empty(bounds, epsilon)?;
    for (row, &target) in u.iter().zip(v) {
        if floored_norm(row) <= NORM_FLOOR {
            return Err(Error::invalid("equality row with zero normal"));
        }
        poly.push_equality(Hyperplane::with_bias(row.clone(), -target))?;
    }
    Ok(poly)
}

/// Known bound rows `z_i >= l` and `-z_i >= -u` for each of `n` dimensions.
pub fn box_rows(l: i64, u: i64, n: usize) -> Result<Vec<Row>> {
    Ok(box_rows_for(&IntBox::uniform(l, u, n)?))
}

pub(crate) fn box_rows_for(bounds: &IntBox) -> Vec<Row> {
    let n = bounds.dim();
    let mut rows = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut lo = vec![0.0; n];
        lo[i] = 1.0;
        rows.push(Row { a: lo, b: -(bounds.lo[i] as f64) });
        let mut hi = vec![0.0; n];
        hi[i] = -1.0;
        rows.push(Row { a: hi, b: bounds.hi[i] as f64 });
    }
    rows
}

/// The row `c·z <= c·y*` turning optimality of `y*` into feasibility.
#[derive(Debug, Clone, PartialEq)]
pub struct CostConstraint {
    pub c: Vec<f64>,
    pub y_star: Vec<i64>,
}

impl CostConstraint {
    pub fn hyperplane(&self) -> Result<Hyperplane> {
        cost_constraint(&self.c, &self.y_star)
    }
}

pub fn cost_constraint(c: &[f64], y_star: &[i64]) -> Result<Hyperplane> {
    check_dim(c.len(), y_star.len())?;
    let norm = norm2(c);
    if !(norm > NORM_FLOOR) {
        return Err(Error::DegenerateCost(norm));
    }
    let cy: f64 = c.iter().zip(y_star).map(|(ci, &yi)| ci * yi as f64).sum();
    Ok(Hyperplane::with_bias(c.iter().map(|v| -v).collect(), cy))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Normal entries from U[-0.5, 0.5], radius 0.2, origin from U[0.25, 0.75].
    Uniform,
    /// Normal and origin entries from N(0, 1), radius 0.
    Gaussian,
}

fn random_hyperplane(n: usize, scheme: InitScheme, rng: &mut crate::rng::Rng) -> Hyperplane {
    match scheme {
        InitScheme::Uniform => {
            let ua = Uniform::new_inclusive(-0.5, 0.5);
            let uo = Uniform::new_inclusive(0.25, 0.75);
            let a: Vec<f64> = (0..n).map(|_| ua.sample(rng)).collect();
            let o: Vec<f64> = (0..n).map(|_| uo.sample(rng)).collect();
            Hyperplane { a, r: 0.2, o }
        }
        InitScheme::Gaussian => {
            let a: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let o: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            Hyperplane { a, r: 0.0, o }
        }
    }
}

/// `m` randomly initialized inequality rows.
pub fn init_polytope(m: usize, n: usize, scheme: InitScheme, bounds: IntBox, epsilon: f64, seed: u64) -> Result<LearnablePolytope> {
    init_units(m, n, scheme, bounds, epsilon, seed, UnitKind::Inequality)
}

/// `m_eq` randomly initialized tied equality pairs (`2 * m_eq` rows).
pub fn init_equalities(m_eq: usize, n: usize, scheme: InitScheme, bounds: IntBox, epsilon: f64, seed: u64) -> Result<LearnablePolytope> {
    init_units(m_eq, n, scheme, bounds, epsilon, seed, UnitKind::Equality)
}

fn init_units(
    m: usize,
    n: usize,
    scheme: InitScheme,
    bounds: IntBox,
    epsilon: f64,
    seed: u64,
    kind: UnitKind,
) -> Result<LearnablePolytope> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("need at least one row and one dimension"));
    }
    check_dim(n, bounds.dim())?;
    let mut rng = rng_from(seed);
    let mut poly = LearnablePolytope::empty(bounds, epsilon)?;
    for _ in 0..m {
        let mut h = random_hyperplane(n, scheme, &mut rng);
        while norm2(&h.a) <= NORM_FLOOR {
            h = random_hyperplane(n, scheme, &mut rng);
        }
        poly.push(h, kind)?;
    }
    Ok(poly)
}

/// True iff every learnable row (and the box, when asked) has non-negative signed distance at `z`.
pub fn check_feasible(z: &[i64], poly: &LearnablePolytope, include_box: bool) -> Result<bool> {
    check_feasible_tol(z, poly, include_box, 0.0)
}

/// Like [`check_feasible`] but accepts rows with slack `a·z + b >= -tol`.
pub fn check_feasible_tol(z: &[i64], poly: &LearnablePolytope, include_box: bool, tol: f64) -> Result<bool> {
    check_dim(poly.dim(), z.len())?;
    if include_box && !poly.bounds().contains(z) {
        return Ok(false);
    }
    let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
    if tol == 0.0 {
        return Ok(poly.distances(&zf)?.iter().all(|&d| d >= 0.0));
    }
    Ok(poly.rows().iter().all(|r| r.slack(&zf) >= -tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn distance_three_four_five() {
        let h = Hyperplane::new(vec![3.0, 4.0], 10.0, vec![0.0, 0.0]).unwrap();
        assert!(close(h.signed_distance(&[1.0, 1.0]).unwrap(), 3.4));
    }

    #[test]
    fn distance_axis_aligned() {
        let h = Hyperplane::with_bias(vec![1.0, 0.0], 0.0);
        assert!(close(signed_distance(&[-2.0, 7.0], &h).unwrap(), -2.0));
    }

    #[test]
    fn distance_on_plane_is_zero() {
        let h = Hyperplane::new(vec![1.0, -2.0], 0.7, vec![0.3, 0.1]).unwrap();
        // a·z + b = 0 along z = t * (2, 1) - b * a / |a|^2
        let b = h.bias();
        let z = [2.0 - b / 5.0, 1.0 + 2.0 * b / 5.0];
        assert!(h.signed_distance(&z).unwrap().abs() < 1e-12);
    }

    #[test]
    fn distance_dimension_mismatch() {
        let h = Hyperplane::with_bias(vec![1.0, 0.0], 0.0);
        assert!(matches!(h.signed_distance(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn offset_enters_bias() {
        // b = r - (o·a)/|a| = 1 - (3*1)/1 = -2
        let h = Hyperplane::new(vec![1.0, 0.0], 1.0, vec![3.0, 5.0]).unwrap();
        assert!(close(h.bias(), -2.0));
        assert!(close(h.signed_distance(&[2.0, 0.0]).unwrap(), 0.0));
    }

    #[test]
    fn relax_equalities_example() {
        let poly = relax_equalities(&[vec![1.0, 1.0]], &[2.0], 0.05, IntBox::uniform(0, 3, 2).unwrap()).unwrap();
        let rows = poly.rows();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].a, vec![1.0, 1.0]);
        assert!(close(rows[0].b, -1.95));
        assert_eq!(rows[1].a, vec![-1.0, -1.0]);
        assert!(close(rows[1].b, 2.05));
        assert_eq!(poly.eq_pairs(), vec![(0, 1)]);
        assert!(check_feasible(&[1, 1], &poly, true).unwrap());
        assert!(!check_feasible(&[1, 0], &poly, true).unwrap());
    }

    #[test]
    fn relax_equalities_rejects_nonpositive_epsilon() {
        let b = IntBox::binary(2);
        assert!(relax_equalities(&[vec![1.0, 1.0]], &[2.0], 0.0, b.clone()).is_err());
        assert!(relax_equalities(&[vec![1.0, 1.0]], &[2.0], -0.1, b).is_err());
    }

    #[test]
    fn box_rows_binary() {
        let rows = box_rows(0, 1, 2).unwrap();
        assert_eq!(rows.len(), 4);
        let feasible = |z: [f64; 2]| rows.iter().all(|r| r.slack(&z) >= 0.0);
        assert!(feasible([0.0, 1.0]));
        assert!(!feasible([2.0, 0.0]));
    }

    #[test]
    fn box_rows_degenerate_and_dense() {
        let rows = box_rows(3, 3, 1).unwrap();
        for z in -2..8 {
            let ok = rows.iter().all(|r| r.slack(&[z as f64]) >= 0.0);
            assert_eq!(ok, z == 3);
        }
        assert_eq!(box_rows(-5, 5, 16).unwrap().len(), 32);
        assert!(box_rows(2, 1, 3).is_err());
    }

    #[test]
    fn cost_constraint_examples() {
        let h = cost_constraint(&[1.0, 1.0], &[0, 1]).unwrap();
        assert_eq!(h.a, vec![-1.0, -1.0]);
        assert!(close(h.bias(), 1.0));
        assert!(close(h.signed_distance(&[1.0, 1.0]).unwrap(), -1.0 / 2f64.sqrt()));
        assert_eq!(h.signed_distance(&[0.0, 1.0]).unwrap(), 0.0);

        let h = cost_constraint(&[2.0, 0.0], &[1, 0]).unwrap();
        assert!(close(h.signed_distance(&[0.0, 0.0]).unwrap(), 1.0));

        assert!(matches!(cost_constraint(&[0.0, 1e-12], &[0, 0]), Err(Error::DegenerateCost(_))));
    }

    #[test]
    fn init_uniform_ranges_and_determinism() {
        let b = IntBox::binary(5);
        let p = init_polytope(20, 5, InitScheme::Uniform, b.clone(), 0.05, 11).unwrap();
        for h in p.units() {
            assert!(h.a.iter().all(|v| (-0.5..=0.5).contains(v)));
            assert!(h.o.iter().all(|v| (0.25..=0.75).contains(v)));
            assert_eq!(h.r, 0.2);
        }
        let q = init_polytope(20, 5, InitScheme::Uniform, b.clone(), 0.05, 11).unwrap();
        assert_eq!(p, q);
        let g1 = init_polytope(4, 5, InitScheme::Gaussian, b.clone(), 0.05, 3).unwrap();
        let g2 = init_polytope(4, 5, InitScheme::Gaussian, b, 0.05, 3).unwrap();
        assert_eq!(g1, g2);
        assert!(g1.units().iter().all(|h| h.r == 0.0));
    }

    #[test]
    fn gaussian_normals_are_isotropic() {
        let p = init_polytope(1000, 3, InitScheme::Gaussian, IntBox::binary(3), 0.05, 5).unwrap();
        let mut mean = [0.0; 3];
        for h in p.units() {
            let s = norm2(&h.a);
            for (m, v) in mean.iter_mut().zip(&h.a) {
                *m += v / s / 1000.0;
            }
        }
        assert!(norm2(&mean) < 0.1, "mean unit normal {mean:?}");
    }

    #[test]
    fn empty_polytope_accepts_everything() {
        let p = LearnablePolytope::empty(IntBox::uniform(-3, 3, 2).unwrap(), 0.05).unwrap();
        assert!(check_feasible(&[100, -100], &p, false).unwrap());
        assert!(!check_feasible(&[100, -100], &p, true).unwrap());
    }

    #[test]
    fn single_row_rejects_point() {
        let mut p = LearnablePolytope::empty(IntBox::uniform(-3, 3, 1).unwrap(), 0.05).unwrap();
        p.push_inequality(Hyperplane::with_bias(vec![1.0], -1.0)).unwrap();
        assert!(!check_feasible(&[0], &p, false).unwrap());
        assert!(check_feasible(&[1], &p, false).unwrap());
    }
}
