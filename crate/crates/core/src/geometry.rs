//! Finite subsets of the integer lattice and the combinatorics the rest of the
//! crate is built on: inner boundaries, Følner ratios, Minkowski sums,
//! separation, slab windows along a subspace, and eccentricity statistics.
//!
//! Every membership decision is made in exact integer or rational
//! arithmetic. Floating point only shows up in reported statistics.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact rational used for measures and geometric parameters.
pub type Rational = Ratio<i64>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        LatticePoint(coords.into())
    }

    pub fn origin(dim: usize) -> Self {
        LatticePoint(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        LatticePoint(v)
    }
}

impl<const N: usize> From<[i64; N]> for LatticePoint {
    fn from(v: [i64; N]) -> Self {
        LatticePoint(v.to_vec())
    }
}

impl Add for &LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: &LatticePoint) -> LatticePoint {
        debug_assert_eq!(self.dim(), rhs.dim());
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: &LatticePoint) -> LatticePoint {
        debug_assert_eq!(self.dim(), rhs.dim());
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &LatticePoint {
    type Output = LatticePoint;
    fn neg(self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|a| -a).collect())
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A finite set of lattice points of a fixed dimension, kept in
/// lexicographic order so that every enumeration is deterministic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shape {
    dim: usize,
    points: BTreeSet<LatticePoint>,
}

impl Shape {
    /// Builds a shape, rejecting points of the wrong dimension. Duplicates
    /// collapse.
    pub fn new(dim: usize, points: impl IntoIterator<Item = LatticePoint>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        let mut set = BTreeSet::new();
        for p in points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
            }
            set.insert(p);
        }
        Ok(Shape { dim, points: set })
    }

    /// Builds a nonempty shape from raw coordinate lists, inferring the
    /// dimension from the first point.
    pub fn from_coords(coords: Vec<Vec<i64>>) -> Result<Self> {
        let dim = coords.first().map(Vec::len).ok_or(Error::EmptyShape)?;
        Shape::new(dim, coords.into_iter().map(LatticePoint))
    }

    pub fn empty(dim: usize) -> Self {
        Shape { dim, points: BTreeSet::new() }
    }

    pub fn singleton(p: LatticePoint) -> Self {
        let dim = p.dim();
        Shape { dim, points: BTreeSet::from([p]) }
    }

    pub fn origin(dim: usize) -> Self {
        Shape::singleton(LatticePoint::origin(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.points.contains(p)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LatticePoint> + '_ {
        self.points.iter()
    }

    pub fn points(&self) -> &BTreeSet<LatticePoint> {
        &self.points
    }

    pub fn translate(&self, v: &LatticePoint) -> Shape {
        Shape { dim: self.dim, points: self.points.iter().map(|p| p + v).collect() }
    }

    pub fn is_subset(&self, other: &Shape) -> bool {
        self.points.is_subset(&other.points)
    }

    pub fn union(&self, other: &Shape) -> Shape {
        Shape { dim: self.dim, points: self.points.union(&other.points).cloned().collect() }
    }

    pub fn difference(&self, other: &Shape) -> Shape {
        Shape { dim: self.dim, points: self.points.difference(&other.points).cloned().collect() }
    }

    pub fn symmetric_difference(&self, other: &Shape) -> Shape {
        Shape {
            dim: self.dim,
            points: self.points.symmetric_difference(&other.points).cloned().collect(),
        }
    }

    /// The difference set `self - other = { a - b }`.
    pub fn difference_set(&self, other: &Shape) -> Shape {
        let mut points = BTreeSet::new();
        for a in &self.points {
            for b in &other.points {
                points.insert(a - b);
            }
        }
        Shape { dim: self.dim, points }
    }

    /// Smallest rectangle containing the shape, or `None` when empty.
    pub fn bounding_box(&self) -> Option<Rectangle> {
        let first = self.points.iter().next()?;
        let mut lo = first.0.clone();
        let mut hi = first.0.clone();
        for p in &self.points {
            for i in 0..self.dim {
                lo[i] = lo[i].min(p.0[i]);
                hi[i] = hi[i].max(p.0[i]);
            }
        }
        Some(Rectangle { lo: LatticePoint(lo), hi: LatticePoint(hi) })
    }

    pub fn to_coords(&self) -> Vec<Vec<i64>> {
        self.points.iter().map(|p| p.0.clone()).collect()
    }

    fn check_dim(&self, other: &Shape) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        Ok(())
    }
}

impl Serialize for Shape {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_coords().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Shape {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<Vec<i64>>::deserialize(deserializer)?;
        Shape::from_coords(coords).map_err(serde::de::Error::custom)
    }
}

/// The lattice box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RectangleRepr", into = "RectangleRepr")]
pub struct Rectangle {
    lo: LatticePoint,
    hi: LatticePoint,
}

#[derive(Serialize, Deserialize)]
struct RectangleRepr {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl TryFrom<RectangleRepr> for Rectangle {
    type Error = Error;
    fn try_from(r: RectangleRepr) -> Result<Self> {
        Rectangle::new(r.lo, r.hi)
    }
}

impl From<Rectangle> for RectangleRepr {
    fn from(r: Rectangle) -> Self {
        RectangleRepr { lo: r.lo.0, hi: r.hi.0 }
    }
}

impl Rectangle {
    pub fn new(lo: impl Into<Vec<i64>>, hi: impl Into<Vec<i64>>) -> Result<Self> {
        let lo = lo.into();
        let hi = hi.into();
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.is_empty() {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::InvalidRectangle { lo, hi });
        }
        Ok(Rectangle { lo: LatticePoint(lo), hi: LatticePoint(hi) })
    }

    /// `[0, side-1]^d`.
    pub fn cube(dim: usize, side: i64) -> Result<Self> {
        if side < 1 {
            return Err(Error::InvalidParameter(format!("cube side must be positive, got {side}")));
        }
        Rectangle::new(vec![0; dim], vec![side - 1; dim])
    }

    /// `[0, w]` for a side vector `w`.
    pub fn from_sides(sides: &[i64]) -> Result<Self> {
        Rectangle::new(vec![0; sides.len()], sides.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn lo(&self) -> &LatticePoint {
        &self.lo
    }

    pub fn hi(&self) -> &LatticePoint {
        &self.hi
    }

    /// Side vector `w = hi - lo`.
    pub fn sides(&self) -> Vec<i64> {
        self.lo.0.iter().zip(&self.hi.0).map(|(a, b)| b - a).collect()
    }

    /// Shortest side `s = min w_i`.
    pub fn short_side(&self) -> i64 {
        self.sides().into_iter().min().unwrap_or(0)
    }

    /// Longest side `ell = max w_i`.
    pub fn long_side(&self) -> i64 {
        self.sides().into_iter().max().unwrap_or(0)
    }

    /// Cardinality `prod (w_i + 1)`.
    pub fn len(&self) -> u64 {
        self.sides().iter().map(|&w| (w + 1) as u64).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major strides: the last axis varies fastest, which matches the
    /// lexicographic order of [`Shape`].
    pub fn strides(&self) -> Vec<i64> {
        let sides = self.sides();
        let mut strides = vec![1i64; sides.len()];
        for i in (0..sides.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * (sides[i + 1] + 1);
        }
        strides
    }

    pub fn contains(&self, p: &[i64]) -> bool {
        p.len() == self.dim()
            && p.iter().zip(&self.lo.0).zip(&self.hi.0).all(|((x, a), b)| a <= x && x <= b)
    }

    pub fn contains_rect(&self, other: &Rectangle) -> bool {
        self.contains(&other.lo.0) && self.contains(&other.hi.0)
    }

    /// Row-major index of `p`, if inside.
    pub fn index_of(&self, p: &[i64]) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let strides = self.strides();
        Some(
            p.iter()
                .zip(&self.lo.0)
                .zip(&strides)
                .map(|((x, a), s)| (x - a) * s)
                .sum::<i64>() as usize,
        )
    }

    pub fn point_at(&self, mut idx: usize) -> LatticePoint {
        let strides = self.strides();
        let mut coords = vec![0i64; self.dim()];
        for (i, s) in strides.iter().enumerate() {
            let s = *s as usize;
            coords[i] = self.lo.0[i] + (idx / s) as i64;
            idx %= s;
        }
        LatticePoint(coords)
    }

    /// Points in row-major order.
    pub fn iter_points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.len() as usize).map(move |i| self.point_at(i))
    }

    pub fn to_shape(&self) -> Shape {
        Shape { dim: self.dim(), points: self.iter_points().collect() }
    }

    pub fn translate(&self, v: &LatticePoint) -> Rectangle {
        Rectangle { lo: &self.lo + v, hi: &self.hi + v }
    }

    /// `|R △ (R+n)| / |R|` in closed form.
    pub fn folner_ratio(&self, n: &LatticePoint) -> Result<Rational> {
        if n.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: n.dim() });
        }
        let overlap: i64 = self
            .sides()
            .iter()
            .zip(&n.0)
            .map(|(w, t)| (w + 1 - t.abs()).max(0))
            .product();
        let size = self.len() as i64;
        Ok(Rational::new(2 * (size - overlap), size))
    }
}

impl fmt::Display for Rectangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Inner `S`-boundary: `⋃ R ∩ (S+v)` over the translates `S+v` that meet
/// the complement of `R`. Only `v ∈ R - S` can contribute.
///
/// Satisfies `∂_S(R) ⊆ ⋃_{n ∈ S-S} R △ (R+n)` for every `S`.
pub fn inner_boundary(r: &Shape, s: &Shape) -> Result<Shape> {
    r.check_dim(s)?;
    let mut points = BTreeSet::new();
    for v in r.difference_set(s).iter() {
        let translate: Vec<LatticePoint> = s.iter().map(|w| w + v).collect();
        if translate.iter().any(|p| !r.contains(p)) {
            points.extend(translate.into_iter().filter(|p| r.contains(p)));
        }
    }
    Ok(Shape { dim: r.dim, points })
}

/// Window-exit boundary: the points `v` of `R` whose window `v + S` is not
/// contained in `R`. These are the levels a window of shape `S` cannot
/// read inside one copy of `R`. Contained in [`inner_boundary`] when
/// `0 ∈ S`.
pub fn exit_boundary(r: &Shape, s: &Shape) -> Result<Shape> {
    r.check_dim(s)?;
    let points = r
        .iter()
        .filter(|v| s.iter().any(|w| !r.contains(&(*v + w))))
        .cloned()
        .collect();
    Ok(Shape { dim: r.dim, points })
}

/// `|R △ (R+n)| / |R|`.
pub fn folner_ratio(r: &Shape, n: &LatticePoint) -> Result<Rational> {
    if r.dim != n.dim() {
        return Err(Error::DimensionMismatch { expected: r.dim, got: n.dim() });
    }
    if r.is_empty() {
        return Err(Error::EmptyShape);
    }
    // |R \ (R+n)| = |(R+n) \ R|, so the symmetric difference is twice it.
    let missing = r.iter().filter(|v| !r.contains(&(*v - n))).count() as i64;
    Ok(Rational::new(2 * missing, r.len() as i64))
}

/// `|∂_S(R)| / |R|`.
pub fn boundary_ratio(r: &Shape, s: &Shape) -> Result<Rational> {
    if r.is_empty() {
        return Err(Error::EmptyShape);
    }
    let b = inner_boundary(r, s)?;
    Ok(Rational::new(b.len() as i64, r.len() as i64))
}

/// `⋃_{n ∈ S-S} R △ (R+n)`.
pub fn translate_difference_union(r: &Shape, s: &Shape) -> Result<Shape> {
    r.check_dim(s)?;
    let mut out = Shape::empty(r.dim);
    for n in s.difference_set(s).iter() {
        out = out.union(&r.symmetric_difference(&r.translate(n)));
    }
    Ok(out)
}

/// Checks `∂_S(R) ⊆ ⋃_{n ∈ S-S} R △ (R+n)`.
pub fn boundary_containment_holds(r: &Shape, s: &Shape) -> Result<bool> {
    Ok(inner_boundary(r, s)?.is_subset(&translate_difference_union(r, s)?))
}

/// `R + J`.
pub fn minkowski_sum(r: &Shape, j: &Shape) -> Result<Shape> {
    r.check_dim(j)?;
    let mut points = BTreeSet::new();
    for v in j.iter() {
        for p in r.iter() {
            points.insert(p + v);
        }
    }
    Ok(Shape { dim: r.dim, points })
}

/// True iff the translates `R + v`, `v ∈ J`, are pairwise disjoint.
pub fn is_separated(r: &Shape, j: &Shape) -> Result<bool> {
    r.check_dim(j)?;
    let mut seen = HashSet::with_capacity(r.len() * j.len());
    for v in j.iter() {
        for p in r.iter() {
            if !seen.insert(p + v) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// An `n`-dimensional subspace of `R^d` spanned by integer vectors.
///
/// Orthogonal integer bases of `V` and `V⊥` are derived once; membership
/// tests compare squared inner products so no square roots appear.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectionSubspace {
    ambient: usize,
    spanning: Vec<LatticePoint>,
    along: Vec<Vec<i128>>,
    across: Vec<Vec<i128>>,
}

impl DirectionSubspace {
    pub fn new(spanning: Vec<LatticePoint>) -> Result<Self> {
        let ambient = spanning
            .first()
            .map(LatticePoint::dim)
            .ok_or_else(|| Error::InvalidParameter("no spanning vectors".into()))?;
        if ambient == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        for v in &spanning {
            if v.dim() != ambient {
                return Err(Error::DimensionMismatch { expected: ambient, got: v.dim() });
            }
        }
        if spanning.len() > ambient {
            return Err(Error::InvalidParameter(format!(
                "{} vectors cannot be independent in dimension {ambient}",
                spanning.len()
            )));
        }
        let rows: Vec<Vec<i128>> =
            spanning.iter().map(|v| v.0.iter().map(|&c| c as i128).collect()).collect();
        let (rank, null) = rank_and_nullspace(&rows, ambient);
        if rank != spanning.len() {
            return Err(Error::InvalidParameter("spanning vectors are linearly dependent".into()));
        }
        let along = orthogonalize(&rows);
        let across = orthogonalize(&null);
        Ok(DirectionSubspace { ambient, spanning, along, across })
    }

    /// `span{e_axis}` in dimension `dim`.
    pub fn axis(dim: usize, axis: usize) -> Result<Self> {
        if axis >= dim {
            return Err(Error::InvalidParameter(format!("axis {axis} out of range for dim {dim}")));
        }
        let mut v = vec![0; dim];
        v[axis] = 1;
        DirectionSubspace::new(vec![LatticePoint(v)])
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    /// `n = dim V`.
    pub fn dim(&self) -> usize {
        self.spanning.len()
    }

    pub fn spanning(&self) -> &[LatticePoint] {
        &self.spanning
    }

    /// If `V` is spanned by a single coordinate axis, that axis.
    pub fn coordinate_axis(&self) -> Option<usize> {
        if self.spanning.len() != 1 {
            return None;
        }
        let v = &self.spanning[0].0;
        let nonzero: Vec<usize> = (0..v.len()).filter(|&i| v[i] != 0).collect();
        (nonzero.len() == 1).then(|| nonzero[0])
    }

    /// Exact test of `z ∈ tQ + mQ'`: coordinates along an orthonormal basis
    /// of `V` in `[0, t]`, along one of `V⊥` in `[-m/2, m/2]`.
    pub fn slab_contains(&self, z: &[i64], t: Rational, m: Rational) -> bool {
        let (tn, td) = (*t.numer() as i128, *t.denom() as i128);
        let (mn, md) = (*m.numer() as i128, *m.denom() as i128);
        for q in &self.along {
            let a = dot(z, q);
            if a < 0 || a * a * td * td > tn * tn * norm2(q) {
                return false;
            }
        }
        for p in &self.across {
            let b = dot(z, p);
            if 4 * b * b * md * md > mn * mn * norm2(p) {
                return false;
            }
        }
        true
    }
}

fn dot(z: &[i64], q: &[i128]) -> i128 {
    z.iter().zip(q).map(|(&a, &b)| a as i128 * b).sum()
}

fn norm2(q: &[i128]) -> i128 {
    q.iter().map(|x| x * x).sum()
}

type BigQ = Ratio<i128>;

/// Rank of the row set and an integer basis of its orthogonal complement.
fn rank_and_nullspace(rows: &[Vec<i128>], dim: usize) -> (usize, Vec<Vec<i128>>) {
    let mut m: Vec<Vec<BigQ>> =
        rows.iter().map(|r| r.iter().map(|&x| BigQ::from_integer(x)).collect()).collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..dim {
        let Some(p) = (row..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(row, p);
        let piv = m[row][col];
        for x in m[row].iter_mut() {
            *x /= piv;
        }
        for i in 0..m.len() {
            if i != row && !m[i][col].is_zero() {
                let f = m[i][col];
                for c in 0..dim {
                    let delta = f * m[row][c];
                    m[i][c] -= delta;
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == m.len() {
            break;
        }
    }
    let rank = pivots.len();
    let mut null = Vec::new();
    for free in (0..dim).filter(|c| !pivots.contains(c)) {
        let mut v = vec![BigQ::zero(); dim];
        v[free] = BigQ::from_integer(1);
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = -m[r][free];
        }
        null.push(to_primitive_integer(&v));
    }
    (rank, null)
}

fn to_primitive_integer(v: &[BigQ]) -> Vec<i128> {
    let l = v.iter().fold(1i128, |acc, x| acc.lcm(x.denom()));
    let ints: Vec<i128> = v.iter().map(|x| (x * BigQ::from_integer(l)).to_integer()).collect();
    let g = ints.iter().fold(0i128, |acc, x| acc.gcd(x));
    if g == 0 {
        ints
    } else {
        ints.into_iter().map(|x| x / g).collect()
    }
}

/// Gram–Schmidt without normalisation, each output scaled to a primitive
/// integer vector. Positive scaling keeps the direction of every vector.
fn orthogonalize(vs: &[Vec<i128>]) -> Vec<Vec<i128>> {
    let mut out: Vec<Vec<i128>> = Vec::new();
    for v in vs {
        let mut w: Vec<BigQ> = v.iter().map(|&x| BigQ::from_integer(x)).collect();
        for q in &out {
            let num: i128 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            let coef = BigQ::new(num, norm2(q));
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= coef * BigQ::from_integer(*qi);
            }
        }
        out.push(to_primitive_integer(&w));
    }
    out
}

/// Lattice points of the slab `S(V,t,m) = tQ + mQ'`, with `Q` the unit cube
/// of `V` anchored at the origin and `Q'` the unit cube of `V⊥` centred at
/// the origin. Boundaries are closed.
pub fn slab_points(v: &DirectionSubspace, t: Rational, m: Rational) -> Result<Shape> {
    let d = v.ambient_dim();
    let n = v.dim();
    if n >= d {
        return Err(Error::InvalidParameter(
            "slab needs dim V < d; use cube_points for the full space".into(),
        ));
    }
    if !t.is_positive() || !m.is_positive() {
        return Err(Error::InvalidParameter(format!("t and m must be positive, got t={t}, m={m}")));
    }
    let tf = t.to_f64().unwrap_or(f64::MAX);
    let mf = m.to_f64().unwrap_or(f64::MAX);
    let radius = tf * (n as f64).sqrt() + 0.5 * mf * ((d - n) as f64).sqrt();
    let b = radius.ceil() as i64 + 1;
    let bbox = Rectangle::new(vec![-b; d], vec![b; d])?;
    let points = bbox
        .iter_points()
        .filter(|z| v.slab_contains(&z.0, t, m))
        .collect();
    Ok(Shape { dim: d, points })
}

/// `S(t) ∩ Z^d = [0, ⌊t⌋]^d`.
pub fn cube_points(t: Rational, dim: usize) -> Result<Shape> {
    if !t.is_positive() {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    Ok(Rectangle::new(vec![0; dim], vec![t.floor().to_integer(); dim])?.to_shape())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EccentricityStage {
    pub stage: usize,
    pub s: i64,
    pub ell: i64,
    /// `log(ell)/s`; infinite for a degenerate rectangle.
    pub ratio: f64,
}

/// Per-stage `log(ell_j)/s_j` with a running maximum.
///
/// The verdict uses the maximum over the computed stages as a finite
/// stand-in for the limsup; it is a trend, not a proof.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EccentricityReport {
    pub stages: Vec<EccentricityStage>,
    pub running_max: Vec<f64>,
    pub threshold: f64,
    pub verdict: bool,
}

impl EccentricityReport {
    pub fn max_ratio(&self) -> f64 {
        self.running_max.last().copied().unwrap_or(0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,s,ell,ratio\n");
        for st in &self.stages {
            out.push_str(&format!("{},{},{},{}\n", st.stage, st.s, st.ell, st.ratio));
        }
        out
    }
}

pub fn eccentricity_stats(rects: &[Rectangle], threshold: f64) -> Result<EccentricityReport> {
    if rects.is_empty() {
        return Err(Error::InvalidParameter("no rectangles".into()));
    }
    let mut stages = Vec::with_capacity(rects.len());
    let mut running_max = Vec::with_capacity(rects.len());
    let mut max = f64::NEG_INFINITY;
    for (i, r) in rects.iter().enumerate() {
        let s = r.short_side();
        let ell = r.long_side();
        let ratio = if s == 0 { f64::INFINITY } else { (ell as f64).ln() / s as f64 };
        max = max.max(ratio);
        stages.push(EccentricityStage { stage: i + 1, s, ell, ratio });
        running_max.push(max);
    }
    Ok(EccentricityReport { stages, running_max, threshold, verdict: max <= threshold })
}
