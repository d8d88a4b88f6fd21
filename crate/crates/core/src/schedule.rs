//! Cutting-and-stacking schedules: a chain of rectangles `R_1, ..., R_K` and
//! stacking sets `J_k` placing disjoint copies of `R_k` inside `R_{k+1}`.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{eccentricity_stats, EccentricityReport, LatticePoint, Rational, Rectangle, Shape};

/// One cutting-and-stacking step: copies of `rect` at the offsets in
/// `stacking`, all inside the next stage's rectangle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub rect: Rectangle,
    pub stacking: Shape,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionSchedule {
    pub dim: usize,
    pub stages: Vec<Stage>,
    pub final_rect: Rectangle,
}

impl ConstructionSchedule {
    /// Number of tower levels, i.e. the largest admissible `K`.
    pub fn levels(&self) -> usize {
        self.stages.len() + 1
    }

    /// `R_k`, 1-based.
    pub fn rect(&self, k: usize) -> &Rectangle {
        assert!(k >= 1 && k <= self.levels(), "level {k} out of range");
        if k == self.levels() {
            &self.final_rect
        } else {
            &self.stages[k - 1].rect
        }
    }

    /// `J_k`, 1-based, `k < K`.
    pub fn stacking(&self, k: usize) -> &Shape {
        &self.stages[k - 1].stacking
    }

    pub fn rects(&self) -> Vec<Rectangle> {
        (1..=self.levels()).map(|k| self.rect(k).clone()).collect()
    }

    /// Coverage fraction `q_k = |J_k| |R_k| / |R_{k+1}|`.
    pub fn coverage(&self, k: usize) -> Rational {
        let covered = self.stacking(k).len() as i64 * self.rect(k).len() as i64;
        Rational::new(covered, self.rect(k + 1).len() as i64)
    }

    /// The first `levels` levels, with `R_levels` as the new top.
    pub fn truncated(&self, levels: usize) -> Result<ConstructionSchedule> {
        if levels == 0 || levels > self.levels() {
            return Err(Error::InvalidParameter(format!(
                "cannot truncate a {}-level schedule to {levels} levels",
                self.levels()
            )));
        }
        Ok(ConstructionSchedule {
            dim: self.dim,
            stages: self.stages[..levels - 1].to_vec(),
            final_rect: self.rect(levels).clone(),
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidSchedule(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("schedule serialises")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DimensionMismatch,
    OriginNotInRect,
    EmptyStacking,
    NotSeparated,
    StackingOutsideNext,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// 1-based stage index `k` of the offending `(R_k, J_k)`.
    pub stage: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FolnerRow {
    pub stage: usize,
    /// `max_i |R △ (R + e_i)| / |R|`.
    pub max_unit_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
    /// `q_k` for every stage, as reduced fractions.
    #[serde(serialize_with = "crate::serialize_rationals")]
    pub coverage: Vec<Rational>,
    /// `μ(E_j)` at the top level, `j = 1..=K`; empty when invalid.
    #[serde(serialize_with = "crate::serialize_rationals")]
    pub error_masses: Vec<Rational>,
    pub folner: Vec<FolnerRow>,
    pub folner_decreasing: bool,
    pub eccentricity: EccentricityReport,
}

/// Default threshold on `log(ell)/s` used in validation reports.
pub const DEFAULT_ECCENTRICITY_THRESHOLD: f64 = 1.0;

/// Checks every stage invariant and collects the Følner, eccentricity and
/// error-mass trends. Violations are reported, not raised.
pub fn validate_schedule(schedule: &ConstructionSchedule) -> ValidationReport {
    validate_schedule_with(schedule, DEFAULT_ECCENTRICITY_THRESHOLD)
}

pub fn validate_schedule_with(
    schedule: &ConstructionSchedule,
    eccentricity_threshold: f64,
) -> ValidationReport {
    let mut violations = Vec::new();
    let d = schedule.dim;
    let levels = schedule.levels();

    for k in 1..=levels {
        let rect = schedule.rect(k);
        if rect.dim() != d {
            violations.push(Violation {
                stage: k,
                kind: ViolationKind::DimensionMismatch,
                detail: format!("R_{k} has dimension {}, schedule has {d}", rect.dim()),
            });
            continue;
        }
        if !rect.contains(&vec![0; d]) {
            violations.push(Violation {
                stage: k,
                kind: ViolationKind::OriginNotInRect,
                detail: format!("origin not in R_{k} = {rect}"),
            });
        }
    }
    if !violations.is_empty() {
        return finish(schedule, violations, eccentricity_threshold);
    }

    for k in 1..levels {
        let rect = schedule.rect(k);
        let next = schedule.rect(k + 1);
        let stacking = schedule.stacking(k);
        if stacking.dim() != d {
            violations.push(Violation {
                stage: k,
                kind: ViolationKind::DimensionMismatch,
                detail: format!("J_{k} has dimension {}", stacking.dim()),
            });
            continue;
        }
        if stacking.is_empty() {
            violations.push(Violation {
                stage: k,
                kind: ViolationKind::EmptyStacking,
                detail: format!("J_{k} is empty"),
            });
            continue;
        }
        let outside: Vec<&LatticePoint> =
            stacking.iter().filter(|v| !next.contains_rect(&rect.translate(v))).collect();
        if let Some(v) = outside.first() {
            violations.push(Violation {
                stage: k,
                kind: ViolationKind::StackingOutsideNext,
                detail: format!("R_{k} + {v} is not inside R_{}", k + 1),
            });
        }
        if let Some((a, b)) = overlapping_pair(rect, stacking) {
            violations.push(Violation {
                stage: k,
                kind: ViolationKind::NotSeparated,
                detail: format!("translates R_{k} + {a} and R_{k} + {b} overlap"),
            });
        }
    }
    finish(schedule, violations, eccentricity_threshold)
}

fn finish(
    schedule: &ConstructionSchedule,
    violations: Vec<Violation>,
    eccentricity_threshold: f64,
) -> ValidationReport {
    let valid = violations.is_empty();
    let levels = schedule.levels();
    let coverage: Vec<Rational> = if valid {
        (1..levels).map(|k| schedule.coverage(k)).collect()
    } else {
        Vec::new()
    };
    let error_masses = if valid { top_level_error_masses(&coverage) } else { Vec::new() };
    let rects = schedule.rects();
    let folner: Vec<FolnerRow> = rects
        .iter()
        .enumerate()
        .map(|(i, r)| FolnerRow { stage: i + 1, max_unit_ratio: max_unit_folner(r) })
        .collect();
    let folner_decreasing = folner.windows(2).all(|w| w[1].max_unit_ratio <= w[0].max_unit_ratio);
    let eccentricity = eccentricity_stats(&rects, eccentricity_threshold)
        .expect("schedule always has at least one rectangle");
    ValidationReport { valid, violations, coverage, error_masses, folner, folner_decreasing, eccentricity }
}

/// `μ(E_j) = 1 - (1 - μ(E_{j+1})) q_j`, with `μ(E_K) = 0`.
fn top_level_error_masses(coverage: &[Rational]) -> Vec<Rational> {
    let mut covered = vec![Rational::one(); coverage.len() + 1];
    for j in (0..coverage.len()).rev() {
        covered[j] = covered[j + 1] * coverage[j];
    }
    covered.into_iter().map(|c| Rational::one() - c).collect()
}

fn max_unit_folner(r: &Rectangle) -> f64 {
    let d = r.dim();
    (0..d)
        .map(|i| {
            let mut e = vec![0; d];
            e[i] = 1;
            let q = r.folner_ratio(&LatticePoint(e)).expect("dimension matches");
            *q.numer() as f64 / *q.denom() as f64
        })
        .fold(0.0, f64::max)
}

/// First pair of overlapping translates of a rectangle, if any.
fn overlapping_pair(rect: &Rectangle, stacking: &Shape) -> Option<(LatticePoint, LatticePoint)> {
    let sides = rect.sides();
    let offsets: Vec<&LatticePoint> = stacking.iter().collect();
    if offsets.len() <= 1024 {
        for (i, a) in offsets.iter().enumerate() {
            for b in &offsets[i + 1..] {
                let overlap = a.0.iter().zip(&b.0).zip(&sides).all(|((x, y), w)| (x - y).abs() <= *w);
                if overlap {
                    return Some(((*a).clone(), (*b).clone()));
                }
            }
        }
        return None;
    }
    // Large stacking sets: paint cells of the bounding box.
    let d = rect.dim();
    let mut lo = vec![i64::MAX; d];
    let mut hi = vec![i64::MIN; d];
    for v in &offsets {
        for i in 0..d {
            lo[i] = lo[i].min(rect.lo().0[i] + v.0[i]);
            hi[i] = hi[i].max(rect.hi().0[i] + v.0[i]);
        }
    }
    let bbox = Rectangle::new(lo, hi).expect("nonempty box");
    let mut owner: Vec<u32> = vec![u32::MAX; bbox.len() as usize];
    for (n, v) in offsets.iter().enumerate() {
        let copy = rect.translate(v);
        for p in copy.iter_points() {
            let idx = bbox.index_of(&p.0).expect("inside bounding box");
            if owner[idx] != u32::MAX {
                return Some((offsets[owner[idx] as usize].clone(), (*v).clone()));
            }
            owner[idx] = n as u32;
        }
    }
    None
}

/// Copies of `small` packed on a regular grid into `big`, as many per axis
/// as fit, starting at `big`'s low corner. Errors if not even one fits.
pub fn packed_stacking(small: &Rectangle, big: &Rectangle) -> Result<Shape> {
    let d = small.dim();
    if big.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: big.dim() });
    }
    let ws = small.sides();
    let wb = big.sides();
    let counts: Vec<i64> = ws.iter().zip(&wb).map(|(a, b)| (b + 1) / (a + 1)).collect();
    if counts.iter().any(|&c| c < 1) {
        return Err(Error::InvalidSchedule(format!("{small} does not fit in {big}")));
    }
    let grid = Rectangle::new(vec![0; d], counts.iter().map(|c| c - 1).collect::<Vec<_>>())?;
    let offsets = grid.iter_points().map(|g| {
        LatticePoint(
            (0..d)
                .map(|i| big.lo().0[i] - small.lo().0[i] + g.0[i] * (ws[i] + 1))
                .collect(),
        )
    });
    Shape::new(d, offsets)
}

fn check_budget(rect: &Rectangle, budget: u64) -> Result<()> {
    let needed = rect.len();
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(())
}

fn schedule_from_rects(dim: usize, rects: Vec<Rectangle>, stackings: Vec<Shape>) -> ConstructionSchedule {
    let mut rects = rects;
    let final_rect = rects.pop().expect("at least one rectangle");
    let stages = rects
        .into_iter()
        .zip(stackings)
        .map(|(rect, stacking)| Stage { rect, stacking })
        .collect();
    ConstructionSchedule { dim, stages, final_rect }
}

/// Exact `base^d`-adic odometer: `R_k = [0, base^k - 1]^d`, tiled exactly
/// by `base^d` copies of `R_{k-1}`.
pub fn odometer_schedule(dim: usize, base: i64, levels: usize, budget: u64) -> Result<ConstructionSchedule> {
    if dim == 0 || base < 2 || levels == 0 {
        return Err(Error::InvalidParameter(format!(
            "odometer needs dim >= 1, base >= 2, levels >= 1 (got {dim}, {base}, {levels})"
        )));
    }
    let mut rects = Vec::with_capacity(levels);
    let mut side = 1i64;
    for _ in 0..levels {
        side = side
            .checked_mul(base)
            .ok_or(Error::BudgetExceeded { needed: u64::MAX, budget })?;
        let r = Rectangle::cube(dim, side)?;
        check_budget(&r, budget)?;
        rects.push(r);
    }
    let stackings = rects
        .windows(2)
        .map(|w| packed_stacking(&w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(schedule_from_rects(dim, rects, stackings))
}

/// Growth rule for [`spacered_schedule`]: each side is
/// `copies * previous + spacer`, starting at `base_side`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpacerGrowth {
    pub base_side: i64,
    pub copies: i64,
    pub spacer: i64,
}

impl Default for SpacerGrowth {
    fn default() -> Self {
        SpacerGrowth { base_side: 8, copies: 2, spacer: 1 }
    }
}

/// Cubes whose copies are pushed to the corners of the next cube, with
/// `spacer` uncovered rows and columns distributed between them.
pub fn spacered_schedule(
    dim: usize,
    growth: SpacerGrowth,
    levels: usize,
    budget: u64,
) -> Result<ConstructionSchedule> {
    let SpacerGrowth { base_side, copies, spacer } = growth;
    if dim == 0 || base_side < 1 || copies < 1 || spacer < 0 || levels == 0 {
        return Err(Error::InvalidParameter(format!("bad spacer growth {growth:?}")));
    }
    let mut sides = vec![base_side];
    for _ in 1..levels {
        let prev = *sides.last().unwrap();
        sides.push(prev * copies + spacer);
    }
    let rects = sides
        .iter()
        .map(|&s| {
            let r = Rectangle::cube(dim, s)?;
            check_budget(&r, budget)?;
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let stackings = sides
        .windows(2)
        .map(|w| {
            let side = w[0];
            let along: Vec<i64> = (0..copies)
                .map(|i| if copies == 1 { 0 } else { i * side + i * spacer / (copies - 1) })
                .collect();
            let grid = Rectangle::new(vec![0; dim], vec![copies - 1; dim])?;
            Shape::new(
                dim,
                grid.iter_points().map(|g| LatticePoint(g.0.iter().map(|&i| along[i as usize]).collect())),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(schedule_from_rects(dim, rects, stackings))
}

/// Rectangles with the given side vectors `w^j`, each stacked into the next
/// by [`packed_stacking`].
pub fn eccentric_schedule(sides: &[Vec<i64>], budget: u64) -> Result<ConstructionSchedule> {
    let dim = sides
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidParameter("no side vectors".into()))?;
    let rects = sides
        .iter()
        .map(|w| {
            if w.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: w.len() });
            }
            let r = Rectangle::from_sides(w)?;
            check_budget(&r, budget)?;
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let stackings = rects
        .windows(2)
        .map(|w| packed_stacking(&w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(schedule_from_rects(dim, rects, stackings))
}

/// Side vectors with short sides `s_j = j + 1` and a long first axis
/// `ell_j = ⌊exp(beta s_j)⌋`.
pub fn exponential_sides(dim: usize, beta: f64, levels: usize) -> Result<Vec<Vec<i64>>> {
    if dim < 2 || !(beta > 0.0) || levels == 0 {
        return Err(Error::InvalidParameter(format!(
            "exponential sides need dim >= 2, beta > 0, levels >= 1 (got {dim}, {beta}, {levels})"
        )));
    }
    Ok((1..=levels)
        .map(|j| {
            let s = j as i64 + 1;
            let ell = (beta * s as f64).exp().floor() as i64;
            let mut w = vec![s; dim];
            w[0] = ell.max(s);
            w
        })
        .collect())
}

/// Checks the exact recursion `μ(E_j) = 1 - (1 - μ(E_{j+1})) q_j`.
pub fn error_mass_recursion_holds(report: &ValidationReport) -> bool {
    let e = &report.error_masses;
    let q = &report.coverage;
    if e.len() != q.len() + 1 || e.last().map_or(true, |x| !x.is_zero()) {
        return false;
    }
    (0..q.len()).all(|j| e[j] == Rational::one() - (Rational::one() - e[j + 1]) * q[j] && e[j] >= e[j + 1])
}
