//! Labeled towers inside a fixed finite space: the tower metric, majority
//! sets, restriction to stacking sets, derived towers and the nested
//! refinement grid.

use std::collections::HashMap;

use num_traits::Zero;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{LatticePoint, Rational, Rectangle, Shape};
use crate::model::{fraction, LevelKModel, ERROR_LABEL};

/// Subset of the cells of a tower's space, by cell index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellSet {
    bits: Vec<bool>,
}

impl CellSet {
    pub fn new(space_len: usize) -> Self {
        CellSet { bits: vec![false; space_len] }
    }

    pub fn from_indices(space_len: usize, cells: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::new(space_len);
        for c in cells {
            s.bits[c] = true;
        }
        s
    }

    pub fn full(space_len: usize) -> Self {
        CellSet { bits: vec![true; space_len] }
    }

    pub fn space_len(&self) -> usize {
        self.bits.len()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.bits[cell]
    }

    pub fn insert(&mut self, cell: usize) {
        self.bits[cell] = true;
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    pub fn symmetric_difference_count(&self, other: &CellSet) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }
}

/// Point ↔ index lookup for a shape, with a closed form when the shape is a
/// full rectangle.
#[derive(Clone, Debug)]
struct ShapeIndex {
    points: Vec<LatticePoint>,
    rect: Option<Rectangle>,
    map: HashMap<LatticePoint, u32>,
}

impl ShapeIndex {
    fn new(shape: &Shape) -> Self {
        let points: Vec<LatticePoint> = shape.iter().cloned().collect();
        let rect = shape.bounding_box().filter(|b| b.len() == shape.len() as u64);
        let map = if rect.is_some() {
            HashMap::new()
        } else {
            points.iter().enumerate().map(|(i, p)| (p.clone(), i as u32)).collect()
        };
        ShapeIndex { points, rect, map }
    }

    fn index_of(&self, p: &[i64]) -> Option<usize> {
        match &self.rect {
            Some(r) => r.index_of(p),
            None => self.map.get(&LatticePoint(p.to_vec())).map(|&i| i as usize),
        }
    }

    /// `v + inner ⊆ self`.
    fn fits(&self, v: &LatticePoint, inner: &ShapeIndex) -> bool {
        if let (Some(outer), Some(inner)) = (&self.rect, &inner.rect) {
            return outer.contains_rect(&inner.translate(v));
        }
        inner.points.iter().all(|p| self.index_of(&(p + v).0).is_some())
    }
}

/// A tower of shape `R` in the cells of `space`: levels `A + v` for `v ∈ R`
/// and the error set of unlabeled cells.
#[derive(Clone, Debug)]
pub struct LabeledTower {
    space: Rectangle,
    shape: Shape,
    index: ShapeIndex,
    /// Per cell: index of its level in `shape`, or `ERROR_LABEL`.
    labels: Vec<u32>,
}

impl PartialEq for LabeledTower {
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space && self.shape == other.shape && self.labels == other.labels
    }
}

impl Eq for LabeledTower {}

impl LabeledTower {
    /// Tower with the given base points; every level must stay in `space`
    /// and levels must be disjoint.
    pub fn new(space: Rectangle, shape: Shape, base: &[LatticePoint]) -> Result<Self> {
        let cells = base
            .iter()
            .map(|b| space.index_of(&b.0).ok_or_else(|| Error::CellOutOfRange(b.0.clone())))
            .collect::<Result<Vec<_>>>()?;
        Self::from_base_cells(space, shape, &cells)
    }

    pub fn from_base_cells(space: Rectangle, shape: Shape, base: &[usize]) -> Result<Self> {
        if shape.dim() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: shape.dim() });
        }
        let index = ShapeIndex::new(&shape);
        let mut labels = vec![ERROR_LABEL; space.len() as usize];
        for &b in base {
            let bp = space.point_at(b);
            for (i, r) in index.points.iter().enumerate() {
                let cell = &bp + r;
                let idx = space
                    .index_of(&cell.0)
                    .ok_or_else(|| Error::InvalidTower(format!("level {r} of base cell {bp} leaves the space")))?;
                if labels[idx] != ERROR_LABEL {
                    return Err(Error::InvalidTower(format!("levels overlap at cell {cell}")));
                }
                labels[idx] = i as u32;
            }
        }
        Ok(LabeledTower { space, shape, index, labels })
    }

    /// Tower `j` of a level-`K` model, as a tower in the cells of `R_K`.
    pub fn from_model_level(model: &LevelKModel, j: usize) -> Result<Self> {
        let shape = model.rect(j).to_shape();
        let origin = vec![0; model.dim()];
        if !model.rect(j).contains(&origin) {
            return Err(Error::InvalidTower(format!("origin not in R_{j}")));
        }
        let index = ShapeIndex::new(&shape);
        let labels = model.level_labels(j).as_ref().clone();
        Ok(LabeledTower { space: model.top_rect().clone(), shape, index, labels })
    }

    pub fn space(&self) -> &Rectangle {
        &self.space
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn cell_count(&self) -> usize {
        self.labels.len()
    }

    fn origin_label(&self) -> Option<u32> {
        self.index.index_of(&vec![0; self.space.dim()]).map(|i| i as u32)
    }

    /// Base cells: the level labeled by the origin.
    pub fn base(&self) -> CellSet {
        let o = self.origin_label();
        CellSet::from_indices(
            self.labels.len(),
            self.labels.iter().enumerate().filter(|(_, l)| Some(**l) == o).map(|(i, _)| i),
        )
    }

    pub fn base_count(&self) -> usize {
        let o = self.origin_label();
        self.labels.iter().filter(|l| Some(**l) == o).count()
    }

    pub fn error_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == ERROR_LABEL).count()
    }

    pub fn level_mass(&self) -> Rational {
        self.mass(self.labels.len() - self.error_count()) / Rational::from_integer(self.shape.len() as i64)
    }

    pub fn error_mass(&self) -> Rational {
        self.mass(self.error_count())
    }

    fn mass(&self, cells: usize) -> Rational {
        Rational::new(cells as i64, self.labels.len() as i64)
    }

    /// `self ≤ finer`: each atom of `finer` (levels and error set) lies in a
    /// single atom of `self`.
    pub fn is_coarser_than(&self, finer: &LabeledTower) -> bool {
        partition_le(&self.labels, &finer.labels)
    }

    /// Cell lists per level, for debugging small towers.
    pub fn to_json(&self, budget: usize) -> Result<serde_json::Value> {
        if self.labels.len() > budget {
            return Err(Error::BudgetExceeded { needed: self.labels.len() as u64, budget: budget as u64 });
        }
        let mut levels: Vec<Vec<Vec<i64>>> = vec![Vec::new(); self.shape.len()];
        let mut error = Vec::new();
        for (c, &l) in self.labels.iter().enumerate() {
            let p = self.space.point_at(c).0;
            if l == ERROR_LABEL {
                error.push(p);
            } else {
                levels[l as usize].push(p);
            }
        }
        Ok(serde_json::json!({
            "space": self.space,
            "shape": self.shape,
            "levels": levels,
            "error": error,
        }))
    }
}

/// Whether the partition `coarse` is constant on every atom of `fine`.
fn partition_le(coarse: &[u32], fine: &[u32]) -> bool {
    let mut seen: HashMap<u32, u32> = HashMap::new();
    coarse.iter().zip(fine).all(|(&c, &f)| *seen.entry(f).or_insert(c) == c)
}

fn same_frame(p: &LabeledTower, q: &LabeledTower) -> Result<()> {
    if p.space != q.space {
        return Err(Error::InvalidTower(format!("towers live in different spaces {} and {}", p.space, q.space)));
    }
    Ok(())
}

/// `Σ_a μ(P_a △ Q_a)` over levels and the error set.
pub fn tower_distance(p: &LabeledTower, q: &LabeledTower) -> Result<Rational> {
    same_frame(p, q)?;
    if p.shape != q.shape {
        return Err(Error::InvalidTower("tower distance needs equal shapes".into()));
    }
    let diff = p.labels.iter().zip(&q.labels).filter(|(a, b)| a != b).count();
    Ok(Rational::new(2 * diff as i64, p.labels.len() as i64))
}

/// Union of the levels `P_a` with `μ(A ∩ P_a) > μ(P_a) / 2`.
pub fn majority_set(a: &CellSet, p: &LabeledTower) -> CellSet {
    let (inside, sizes) = level_overlaps(a, p);
    let majority: Vec<bool> = inside.iter().zip(&sizes).map(|(i, s)| 2 * i > *s).collect();
    CellSet::from_indices(
        p.labels.len(),
        p.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l != ERROR_LABEL && majority[**l as usize])
            .map(|(c, _)| c),
    )
}

fn level_overlaps(a: &CellSet, p: &LabeledTower) -> (Vec<usize>, Vec<usize>) {
    let mut inside = vec![0usize; p.shape.len()];
    let mut sizes = vec![0usize; p.shape.len()];
    for (c, &l) in p.labels.iter().enumerate() {
        if l != ERROR_LABEL {
            sizes[l as usize] += 1;
            if a.contains(c) {
                inside[l as usize] += 1;
            }
        }
    }
    (inside, sizes)
}

/// `Q_J`: the tower of shape `R` with base `⋃_{u∈J} (B + u)`.
pub fn restrict_tower(q: &LabeledTower, r: &Shape, j: &Shape) -> Result<LabeledTower> {
    if r.dim() != q.space.dim() || j.dim() != q.space.dim() {
        return Err(Error::DimensionMismatch { expected: q.space.dim(), got: r.dim().max(j.dim()) });
    }
    let r_index = ShapeIndex::new(r);
    if !stacking_separated(&r_index, j) {
        return Err(Error::InvalidTower("stacking set is not separated".into()));
    }
    let mut relabel = vec![ERROR_LABEL; q.shape.len()];
    for u in j.iter() {
        if !q.index.fits(u, &r_index) {
            return Err(Error::InvalidTower(format!("R + {u} is not inside the tower shape")));
        }
        for (i, p) in r_index.points.iter().enumerate() {
            let s = q.index.index_of(&(p + u).0).expect("checked inside");
            relabel[s] = i as u32;
        }
    }
    let labels = q
        .labels
        .iter()
        .map(|&l| if l == ERROR_LABEL { ERROR_LABEL } else { relabel[l as usize] })
        .collect();
    let out = LabeledTower { space: q.space.clone(), shape: r.clone(), index: r_index, labels };
    debug_assert!(out.is_coarser_than(q));
    Ok(out)
}

fn stacking_separated(r: &ShapeIndex, j: &Shape) -> bool {
    if let Some(rect) = &r.rect {
        let sides = rect.sides();
        let offsets: Vec<&LatticePoint> = j.iter().collect();
        if offsets.len() <= 2048 {
            return offsets.iter().enumerate().all(|(i, a)| {
                offsets[i + 1..]
                    .iter()
                    .all(|b| a.0.iter().zip(&b.0).zip(&sides).any(|((x, y), w)| (x - y).abs() > *w))
            });
        }
    }
    let mut seen = std::collections::HashSet::new();
    j.iter().all(|u| r.points.iter().all(|p| seen.insert(p + u)))
}

/// Result of building `P(Q)`.
#[derive(Clone, Debug, PartialEq)]
pub enum DerivedOutcome {
    Tower { tower: LabeledTower, stacking: Shape },
    /// Every majority level lies in the boundary `∂_R(S)`.
    EmptyStacking { majority_levels: usize },
}

impl DerivedOutcome {
    pub fn tower(&self) -> Option<&LabeledTower> {
        match self {
            DerivedOutcome::Tower { tower, .. } => Some(tower),
            DerivedOutcome::EmptyStacking { .. } => None,
        }
    }
}

/// `P(Q) = Q_J` with `J` the majority levels of `Q` for the base of `P`,
/// minus `∂_R(S)`. Requires `0 ∈ R ⊆ S` and `P ≤ Q`.
pub fn derived_tower(p: &LabeledTower, q: &LabeledTower) -> Result<DerivedOutcome> {
    if !p.is_coarser_than(q) {
        return Err(Error::InvalidTower("P is not coarser than Q".into()));
    }
    derived_tower_relaxed(p, q)
}

/// [`derived_tower`] without the `P ≤ Q` check, as used when refining an
/// arbitrary tower sequence.
pub fn derived_tower_relaxed(p: &LabeledTower, q: &LabeledTower) -> Result<DerivedOutcome> {
    same_frame(p, q)?;
    let d = p.space.dim();
    if p.origin_label().is_none() {
        return Err(Error::InvalidTower("origin not in the shape of P".into()));
    }
    if !p.shape.is_subset(&q.shape) {
        return Err(Error::InvalidTower("shape of P is not inside the shape of Q".into()));
    }
    let (inside, sizes) = level_overlaps(&p.base(), q);
    let majority: Vec<usize> = (0..q.shape.len()).filter(|&v| 2 * inside[v] > sizes[v]).collect();
    if majority.is_empty() {
        return Err(Error::InvalidTower("majority set of the base of P in Q is empty".into()));
    }
    let j: Vec<LatticePoint> = majority
        .iter()
        .map(|&v| q.index.points[v].clone())
        .filter(|v| q.index.fits(v, &p.index))
        .collect();
    if j.is_empty() {
        return Ok(DerivedOutcome::EmptyStacking { majority_levels: majority.len() });
    }
    let j = Shape::new(d, j)?;
    if !stacking_separated(&p.index, &j) {
        return Err(Error::InvalidTower("derived stacking set is not separated".into()));
    }
    let tower = restrict_tower(q, &p.shape, &j)?;
    Ok(DerivedOutcome::Tower { tower, stacking: j })
}

/// Both sides of the derived-tower distance bound
/// `d(P(Q), P) ≤ |R| μ(A(Q) △ A) + |∂_R(S)| μ(B) + |R| μ(E_Q)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeedgeomCheck {
    #[serde(serialize_with = "crate::serialize_rational")]
    pub lhs: Rational,
    #[serde(serialize_with = "crate::serialize_rational")]
    pub rhs: Rational,
    pub holds: bool,
    /// `2|R| (μ(A(Q) △ A) + |∂_R(S)| μ(B))`, which always bounds the left side.
    #[serde(serialize_with = "crate::serialize_rational")]
    pub rhs_corrected: Rational,
    pub boundary_size: usize,
}

/// `None` when the derived stacking set is empty.
pub fn needgeom_check(p: &LabeledTower, q: &LabeledTower) -> Result<Option<NeedgeomCheck>> {
    let derived = match derived_tower(p, q)? {
        DerivedOutcome::Tower { tower, .. } => tower,
        DerivedOutcome::EmptyStacking { .. } => return Ok(None),
    };
    let lhs = tower_distance(&derived, p)?;
    let a = p.base();
    let a_q = majority_set(&a, q);
    let n = p.cell_count() as i64;
    let r = p.shape.len() as i64;
    let boundary = q.index.points.iter().filter(|v| !q.index.fits(v, &p.index)).count() as i64;
    let sym = Rational::new(a_q.symmetric_difference_count(&a) as i64, n);
    let base_q = Rational::new(q.base_count() as i64, n);
    let rhs = sym * r + base_q * boundary + q.error_mass() * r;
    let rhs_corrected = (sym + base_q * boundary) * (2 * r);
    Ok(Some(NeedgeomCheck { holds: lhs <= rhs, lhs, rhs, rhs_corrected, boundary_size: boundary as usize }))
}

/// Summable budget sequence `δ_j`, `j ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum DeltaSchedule {
    /// `δ_j = 2^{-j}`.
    Geometric,
    /// Explicit values from `j = 0`; the last value repeats.
    Explicit(#[serde(serialize_with = "crate::serialize_rationals")] Vec<Rational>),
}

impl DeltaSchedule {
    pub fn get(&self, j: usize) -> Rational {
        match self {
            DeltaSchedule::Geometric => Rational::new(1, 1i64 << j.min(62)),
            DeltaSchedule::Explicit(v) => *v.get(j).or(v.last()).unwrap_or(&Rational::zero()),
        }
    }

    /// `Σ_{i=from}^{to-1} δ_i`.
    pub fn sum(&self, from: usize, to: usize) -> Rational {
        (from..to).fold(Rational::zero(), |acc, i| acc + self.get(i))
    }

    /// `Σ_{i≥from} δ_i` for the geometric schedule; `None` for explicit ones.
    pub fn tail(&self, from: usize) -> Option<Rational> {
        match self {
            DeltaSchedule::Geometric => Some(Rational::new(2, 1i64 << from.min(61))),
            DeltaSchedule::Explicit(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisRow {
    pub k: usize,
    /// `d(P_k(P_{k+1}), P_k)`.
    #[serde(serialize_with = "crate::serialize_rational")]
    pub distance: Rational,
    #[serde(serialize_with = "crate::serialize_rational")]
    pub delta: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRow {
    pub k: usize,
    pub ell: usize,
    /// `d(P_{k,ℓ}, P_{k,ℓ+1})`.
    #[serde(serialize_with = "crate::serialize_rational")]
    pub distance_to_next: Rational,
    /// `δ_ℓ`.
    #[serde(serialize_with = "crate::serialize_rational")]
    pub cauchy_bound: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CauchyCheck {
    pub k: usize,
    pub ell: usize,
    pub m: usize,
    #[serde(serialize_with = "crate::serialize_rational")]
    pub distance: Rational,
    /// `Σ_{j=ℓ}^{ℓ+m-1} δ_j`.
    #[serde(serialize_with = "crate::serialize_rational")]
    pub bound: Rational,
    /// `Σ_{j=ℓ}^{ℓ+m-1} δ_{k+j}`, the sharper bound from contraction.
    #[serde(serialize_with = "crate::serialize_rational")]
    pub tight_bound: Rational,
    pub holds: bool,
}

#[derive(Clone, Debug)]
pub struct RefinementTrace {
    /// `grid[k-1][ℓ] = P_{k,ℓ}`, defined for `k + ℓ ≤ n` and `ℓ ≤ depth`.
    pub grid: Vec<Vec<LabeledTower>>,
    /// `I_k`, the stacking set of `R_k` in `R_{k+1}`.
    pub stacking_sets: Vec<Shape>,
    pub hypotheses: Vec<HypothesisRow>,
    pub steps: Vec<StepRow>,
    pub cauchy: Vec<CauchyCheck>,
    pub deltas: DeltaSchedule,
}

impl RefinementTrace {
    pub fn violations(&self) -> usize {
        self.cauchy.iter().filter(|c| !c.holds).count()
    }

    pub fn deepest(&self, k: usize) -> Option<&LabeledTower> {
        self.grid.get(k - 1).and_then(|c| c.last())
    }

    /// `Σ_{j≥ℓ} δ_j` at the deepest column of row `k`.
    pub fn tail_bound(&self, k: usize) -> Option<Rational> {
        let depth = self.grid.get(k - 1)?.len().checked_sub(1)?;
        self.deltas.tail(depth)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,ell,distance_to_next,cauchy_bound\n");
        for s in &self.steps {
            out.push_str(&format!("{},{},{},{}\n", s.k, s.ell, fraction(&s.distance_to_next), fraction(&s.cauchy_bound)));
        }
        out
    }
}

/// Builds `P_{k,ℓ}`: `P_{k,0} = P_k`, `P_{k,1} = P_k(P_{k+1})` with stacking
/// set `I_k`, and `P_{k,ℓ} = (P_{k+1,ℓ-1})_{I_k}`.
pub fn refine_sequence(towers: &[LabeledTower], deltas: &DeltaSchedule, depth: usize) -> Result<RefinementTrace> {
    let n = towers.len();
    if n < 2 {
        return Err(Error::InvalidParameter("refinement needs at least two towers".into()));
    }
    let mut stacking_sets = Vec::with_capacity(n - 1);
    let mut hypotheses = Vec::with_capacity(n - 1);
    let mut grid: Vec<Vec<LabeledTower>> = towers.iter().map(|t| vec![t.clone()]).collect();
    for k in 1..n {
        let (p, q) = (&towers[k - 1], &towers[k]);
        let outcome = derived_tower_relaxed(p, q).map_err(|e| refinement(k, 1, e.to_string()))?;
        let (tower, stacking) = match outcome {
            DerivedOutcome::Tower { tower, stacking } => (tower, stacking),
            DerivedOutcome::EmptyStacking { .. } => return Err(refinement(k, 1, "empty derived stacking set".into())),
        };
        let distance = tower_distance(&tower, p).map_err(|e| refinement(k, 1, e.to_string()))?;
        let delta = deltas.get(k);
        if distance >= delta {
            return Err(refinement(k, 1, format!("d(P_k(P_k+1), P_k) = {distance} is not below delta_k = {delta}")));
        }
        hypotheses.push(HypothesisRow { k, distance, delta });
        stacking_sets.push(stacking);
        grid[k - 1].push(tower);
    }
    for ell in 2..=depth {
        for k in 1..n {
            if k + ell > n {
                break;
            }
            let parent = &grid[k][ell - 1];
            let next = restrict_tower(parent, towers[k - 1].shape(), &stacking_sets[k - 1])
                .map_err(|e| refinement(k, ell, e.to_string()))?;
            if !next.is_coarser_than(parent) {
                return Err(refinement(k, ell, "P_{k,l} is not coarser than P_{k+1,l-1}".into()));
            }
            grid[k - 1].push(next);
        }
    }
    let mut steps = Vec::new();
    let mut cauchy = Vec::new();
    for (ki, column) in grid.iter().enumerate() {
        let k = ki + 1;
        for ell in 0..column.len() {
            if ell + 1 < column.len() {
                steps.push(StepRow {
                    k,
                    ell,
                    distance_to_next: tower_distance(&column[ell], &column[ell + 1])?,
                    cauchy_bound: deltas.get(ell),
                });
            }
            for m in 1..column.len() - ell {
                let distance = tower_distance(&column[ell], &column[ell + m])?;
                let bound = deltas.sum(ell, ell + m);
                let tight_bound = (ell..ell + m).fold(Rational::zero(), |acc, j| acc + deltas.get(k + j));
                cauchy.push(CauchyCheck { k, ell, m, distance, bound, tight_bound, holds: distance <= bound });
            }
        }
    }
    Ok(RefinementTrace { grid, stacking_sets, hypotheses, steps, cauchy, deltas: deltas.clone() })
}

fn refinement(k: usize, ell: usize, reason: String) -> Error {
    Error::Refinement { k, ell, reason }
}

/// Towers of the 1D dyadic odometer on `[0, 2^top - 1]` at the given levels,
/// with random swaps: two aligned neighbouring copies are replaced by one
/// copy shifted by half a period.
#[derive(Clone, Debug)]
pub struct PerturbedOdometer {
    pub space: Rectangle,
    pub levels: Vec<usize>,
    pub swaps: Vec<usize>,
    pub towers: Vec<LabeledTower>,
}

/// `swaps_per_tower[i]` swaps at tower `i`; `None` picks
/// `⌊δ_k |space| / (16 |R_k|)⌋`, capped by the available pairs.
pub fn perturbed_odometer(
    top: u32,
    levels: &[usize],
    deltas: &DeltaSchedule,
    swaps_per_tower: Option<&[usize]>,
    seed: u64,
) -> Result<PerturbedOdometer> {
    if top > 24 || levels.iter().any(|&l| l == 0 || l as u32 > top) || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!("bad levels {levels:?} for top level {top}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1i64 << top;
    let space = Rectangle::new(vec![0], vec![n - 1])?;
    let mut towers = Vec::new();
    let mut swaps = Vec::new();
    for (i, &lev) in levels.iter().enumerate() {
        let period = 1i64 << lev;
        let copies = (n / period) as usize;
        let pairs = copies / 2;
        let wanted = match swaps_per_tower {
            Some(s) => *s.get(i).unwrap_or(&0),
            None => {
                let q = deltas.get(i + 1) * Rational::from_integer(n) / Rational::from_integer(16 * period);
                q.to_integer() as usize
            }
        };
        let count = wanted.min(pairs);
        let mut base: Vec<i64> = (0..copies as i64).map(|c| c * period).collect();
        if count > 0 {
            let mut chosen: Vec<usize> = sample(&mut rng, pairs, count).into_vec();
            chosen.sort_unstable();
            for &pair in chosen.iter().rev() {
                let lo = 2 * pair;
                base.remove(lo + 1);
                base[lo] += period / 2;
            }
        }
        swaps.push(count);
        let shape = Rectangle::new(vec![0], vec![period - 1])?.to_shape();
        let cells: Vec<usize> = base.iter().map(|&b| b as usize).collect();
        towers.push(LabeledTower::from_base_cells(space.clone(), shape, &cells)?);
    }
    Ok(PerturbedOdometer { space, levels: levels.to_vec(), swaps, towers })
}

fn random_rect_with_origin(rng: &mut ChaCha8Rng, dim: usize, max_side: i64) -> Rectangle {
    let hi: Vec<i64> = (0..dim).map(|_| rng.gen_range(0..max_side)).collect();
    let lo: Vec<i64> = hi.iter().map(|&h| -rng.gen_range(0..=(max_side - 1 - h).min(1))).collect();
    Rectangle::new(lo, hi).expect("lo <= 0 <= hi")
}

/// Random tower of the given shape: up to `copies` disjoint copies placed by
/// rejection at random positions of `space`.
pub fn random_tower(rng: &mut ChaCha8Rng, space: &Rectangle, shape: &Shape, copies: usize) -> Result<LabeledTower> {
    let idx = ShapeIndex::new(shape);
    let mut used = vec![false; space.len() as usize];
    let mut base = Vec::new();
    for _ in 0..copies * 20 {
        if base.len() == copies {
            break;
        }
        let c = rng.gen_range(0..space.len() as usize);
        let cp = space.point_at(c);
        let cells: Option<Vec<usize>> = idx.points.iter().map(|r| space.index_of(&(&cp + r).0)).collect();
        if let Some(cells) = cells {
            if cells.iter().all(|&x| !used[x]) {
                for x in cells {
                    used[x] = true;
                }
                base.push(c);
            }
        }
    }
    LabeledTower::from_base_cells(space.clone(), shape.clone(), &base)
}

/// Random `R`-separated `J` with `R + J ⊆ S`, for rectangles `R, S`.
pub fn random_stacking(rng: &mut ChaCha8Rng, r: &Rectangle, s: &Rectangle, max_copies: usize) -> Shape {
    let d = r.dim();
    let mut chosen: Vec<LatticePoint> = Vec::new();
    let sides = r.sides();
    let lo: Vec<i64> = (0..d).map(|i| s.lo().0[i] - r.lo().0[i]).collect();
    let hi: Vec<i64> = (0..d).map(|i| s.hi().0[i] - r.hi().0[i]).collect();
    if lo.iter().zip(&hi).any(|(a, b)| a > b) {
        return Shape::empty(d);
    }
    for _ in 0..max_copies * 20 {
        if chosen.len() == max_copies {
            break;
        }
        let v = LatticePoint((0..d).map(|i| rng.gen_range(lo[i]..=hi[i])).collect());
        let clear = chosen
            .iter()
            .all(|u| u.0.iter().zip(&v.0).zip(&sides).any(|((x, y), w)| (x - y).abs() > *w));
        if clear {
            chosen.push(v);
        }
    }
    Shape::new(d, chosen).unwrap_or_else(|_| Shape::empty(d))
}

/// Random `(Q, Q', R, J)` for the restriction contraction: two towers of a
/// common shape `S`, and a stacking set `J` of `R` in `S`.
pub fn random_metric_fixture(seed: u64) -> Result<(LabeledTower, LabeledTower, Shape, Shape)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let dim = rng.gen_range(1..=2);
        let side = if dim == 1 { 40 } else { 9 };
        let space = Rectangle::cube(dim, side)?;
        let s = random_rect_with_origin(&mut rng, dim, if dim == 1 { 8 } else { 4 });
        let r = random_rect_with_origin(&mut rng, dim, 3);
        if !s.contains_rect(&r) {
            continue;
        }
        let j = random_stacking(&mut rng, &r, &s, 3);
        if j.is_empty() {
            continue;
        }
        let sh = s.to_shape();
        let copies = rng.gen_range(1..=4);
        let q = random_tower(&mut rng, &space, &sh, copies)?;
        let q2 = if rng.gen_bool(0.5) {
            random_tower(&mut rng, &space, &sh, copies)?
        } else {
            let mut base: Vec<usize> = q.base().iter().collect();
            if let Some(b) = base.first_mut() {
                let p = space.point_at(*b);
                let moved = &p + &LatticePoint((0..dim).map(|_| rng.gen_range(-1..=1)).collect());
                if let Some(i) = space.index_of(&moved.0) {
                    *b = i;
                }
            }
            LabeledTower::from_base_cells(space.clone(), sh.clone(), &base).unwrap_or_else(|_| q.clone())
        };
        return Ok((q, q2, r.to_shape(), j));
    }
}

/// Random `(P, Q)` with `0 ∈ R ⊆ S`, `P ≤ Q` and a nonempty majority set,
/// found by rejection sampling in small spaces.
pub fn random_needgeom_fixture(seed: u64) -> Result<(LabeledTower, LabeledTower)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..200_000 {
        let dim = rng.gen_range(1..=2);
        let space = if dim == 1 {
            Rectangle::cube(1, rng.gen_range(6..=24))?
        } else {
            Rectangle::new(vec![0, 0], vec![rng.gen_range(2..=5), rng.gen_range(2..=5)])?
        };
        let s = random_rect_with_origin(&mut rng, dim, if dim == 1 { 6 } else { 3 });
        let r = random_rect_with_origin(&mut rng, dim, if dim == 1 { 3 } else { 2 });
        if !s.contains_rect(&r) {
            continue;
        }
        let q_copies = rng.gen_range(1..=3);
        let q = random_tower(&mut rng, &space, &s.to_shape(), q_copies)?;
        if q.base_count() == 0 {
            continue;
        }
        let p_copies = rng.gen_range(1..=4);
        let p = random_tower(&mut rng, &space, &r.to_shape(), p_copies)?;
        if p.base_count() == 0 || !p.is_coarser_than(&q) {
            continue;
        }
        if majority_set(&p.base(), &q).is_empty() {
            continue;
        }
        return Ok((p, q));
    }
    Err(Error::InvalidParameter(format!("no fixture found for seed {seed}")))
}
