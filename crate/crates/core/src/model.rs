//! Exact finite realization of a schedule: tower `K` is the whole space, so
//! every cell of `R_K` carries mass `1/|R_K|` and all masses are rationals.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{LatticePoint, Rational, Rectangle, Shape};
use crate::schedule::{validate_schedule, ConstructionSchedule};

/// Label-table value for cells outside every copy of `R_j`.
pub const ERROR_LABEL: u32 = u32::MAX;

/// Default ceiling on `|R_K|`.
pub const DEFAULT_CELL_BUDGET: u64 = 1 << 22;

/// Ceiling on `|R_K|` for the cell-by-cell oracle.
pub const BRUTE_FORCE_BUDGET: u64 = 100_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Label {
    Level(LatticePoint),
    Error,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Level(p) => write!(f, "{p}"),
            Label::Error => write!(f, "e"),
        }
    }
}

pub struct LevelKModel {
    schedule: ConstructionSchedule,
    rects: Vec<Rectangle>,
    /// `|J_{j,K}|`, indexed by `j - 1`.
    copies: Vec<u64>,
    /// `child[j - 1]` maps an index of `R_{j+1}` to the index of `R_j` it
    /// lies in, or `ERROR_LABEL`.
    child: Vec<Vec<u32>>,
    relative: Mutex<HashMap<(usize, usize), Arc<Vec<u32>>>>,
}

impl fmt::Debug for LevelKModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelKModel")
            .field("dim", &self.dim())
            .field("levels", &self.levels())
            .field("cells", &self.cell_count())
            .finish()
    }
}

impl Clone for LevelKModel {
    fn clone(&self) -> Self {
        LevelKModel {
            schedule: self.schedule.clone(),
            rects: self.rects.clone(),
            copies: self.copies.clone(),
            child: self.child.clone(),
            relative: Mutex::new(HashMap::new()),
        }
    }
}

/// Builds the level-`K` model of `schedule`.
pub fn build_model(schedule: &ConstructionSchedule, k_top: usize, budget: u64) -> Result<LevelKModel> {
    LevelKModel::new(schedule, k_top, budget)
}

impl LevelKModel {
    pub fn new(schedule: &ConstructionSchedule, k_top: usize, budget: u64) -> Result<Self> {
        let schedule = schedule.truncated(k_top)?;
        let report = validate_schedule(&schedule);
        if let Some(v) = report.violations.first() {
            return Err(Error::InvalidSchedule(format!("stage {}: {}", v.stage, v.detail)));
        }
        let rects = schedule.rects();
        let cells = rects[k_top - 1].len();
        if cells > budget {
            return Err(Error::BudgetExceeded { needed: cells, budget });
        }
        if cells >= ERROR_LABEL as u64 {
            return Err(Error::BudgetExceeded { needed: cells, budget: ERROR_LABEL as u64 - 1 });
        }
        let mut copies = vec![1u64; k_top];
        for j in (1..k_top).rev() {
            copies[j - 1] = copies[j] * schedule.stacking(j).len() as u64;
        }
        let child = (1..k_top)
            .map(|j| {
                let small = &rects[j - 1];
                let big = &rects[j];
                let mut table = vec![ERROR_LABEL; big.len() as usize];
                for v in schedule.stacking(j).iter() {
                    for (i, p) in small.iter_points().enumerate() {
                        let cell = &p + v;
                        table[big.index_of(&cell.0).expect("validated containment")] = i as u32;
                    }
                }
                table
            })
            .collect();
        Ok(LevelKModel { schedule, rects, copies, child, relative: Mutex::new(HashMap::new()) })
    }

    pub fn schedule(&self) -> &ConstructionSchedule {
        &self.schedule
    }

    pub fn dim(&self) -> usize {
        self.schedule.dim
    }

    /// `K`.
    pub fn levels(&self) -> usize {
        self.rects.len()
    }

    pub fn rect(&self, j: usize) -> &Rectangle {
        &self.rects[j - 1]
    }

    pub fn top_rect(&self) -> &Rectangle {
        self.rects.last().expect("at least one level")
    }

    /// `|R_K|`.
    pub fn cell_count(&self) -> u64 {
        self.top_rect().len()
    }

    pub fn cell_measure(&self) -> Rational {
        Rational::new(1, self.cell_count() as i64)
    }

    /// `|J_{j,K}|`, the number of copies of `R_j` in `R_K`.
    pub fn copies(&self, j: usize) -> u64 {
        self.copies[j - 1]
    }

    /// Mass of one level of tower `j`: `|J_{j,K}| / |R_K|`.
    pub fn level_mass(&self, j: usize) -> Rational {
        Rational::new(self.copies(j) as i64, self.cell_count() as i64)
    }

    /// `μ(E_j) = 1 - |J_{j,K}| |R_j| / |R_K|`.
    pub fn error_mass(&self, j: usize) -> Rational {
        Rational::one() - self.level_mass(j) * Rational::from_integer(self.rect(j).len() as i64)
    }

    /// Exact mass checks: every `μ(E_j)` lies in `[0, 1]`, the error sets
    /// shrink with `j`, `μ(E_K) = 0`, and copy counts follow the stacking
    /// sets. Returns one message per failure.
    pub fn consistency_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let k_top = self.levels();
        for j in 1..=k_top {
            let e = self.error_mass(j);
            if e < Rational::zero() || e > Rational::one() {
                out.push(format!("j={j}: error mass {} outside [0, 1]", fraction(&e)));
            }
            if j < k_top {
                if self.error_mass(j + 1) > e {
                    out.push(format!("j={j}: error mass grows at j+1"));
                }
                let expected = self.copies(j + 1) * self.schedule.stacking(j).len() as u64;
                if self.copies(j) != expected {
                    out.push(format!("j={j}: {} copies, stacking gives {expected}", self.copies(j)));
                }
            }
        }
        if !self.error_mass(k_top).is_zero() {
            out.push(format!("j={k_top}: top error mass is nonzero"));
        }
        out
    }

    /// Test hook: multiplies the copy count of level `j` by `factor`.
    #[doc(hidden)]
    pub fn corrupt_copies(&mut self, j: usize, factor: u64) {
        self.copies[j - 1] *= factor;
    }

    /// `J_{j,K}` by set-sum composition `J_{j,K} = J_{j+1,K} + J_j`.
    pub fn placements(&self, j: usize) -> Shape {
        let d = self.dim();
        let mut current = vec![vec![0i64; d]];
        for i in (j..self.levels()).rev() {
            let stacking = self.schedule.stacking(i);
            current = current
                .iter()
                .flat_map(|p| {
                    stacking.iter().map(move |v| p.iter().zip(&v.0).map(|(a, b)| a + b).collect())
                })
                .collect();
        }
        Shape::new(d, current.into_iter().map(LatticePoint)).expect("placements share dimension")
    }

    /// Table mapping each index of `R_j` to the index of the `R_k` copy
    /// containing it within `R_j`'s hierarchical tiling, or `ERROR_LABEL`.
    pub fn relative_labels(&self, j: usize, k: usize) -> Arc<Vec<u32>> {
        assert!(1 <= k && k <= j && j <= self.levels(), "need 1 <= k <= j <= K");
        if let Some(t) = self.relative.lock().expect("label cache").get(&(j, k)) {
            return t.clone();
        }
        let mut table: Vec<u32> = (0..self.rect(j).len() as u32).collect();
        for i in (k..j).rev() {
            let child = &self.child[i - 1];
            table.par_iter_mut().for_each(|x| {
                if *x != ERROR_LABEL {
                    *x = child[*x as usize];
                }
            });
        }
        let table = Arc::new(table);
        self.relative.lock().expect("label cache").insert((j, k), table.clone());
        table
    }

    /// Tower-`j` label of every cell of `R_K`, as an index into `R_j`.
    pub fn level_labels(&self, j: usize) -> Arc<Vec<u32>> {
        self.relative_labels(self.levels(), j)
    }

    pub fn cell_index(&self, cell: &LatticePoint) -> Result<usize> {
        if cell.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: cell.dim() });
        }
        self.top_rect().index_of(&cell.0).ok_or_else(|| Error::CellOutOfRange(cell.0.clone()))
    }

    pub fn label_of_cell(&self, j: usize, cell: &LatticePoint) -> Result<Label> {
        if j == 0 || j > self.levels() {
            return Err(Error::InvalidParameter(format!("level {j} outside 1..={}", self.levels())));
        }
        let idx = self.cell_index(cell)?;
        Ok(match self.level_labels(j)[idx] {
            ERROR_LABEL => Label::Error,
            l => Label::Level(self.rect(j).point_at(l as usize)),
        })
    }

    /// `cell + v` if it stays in `R_K`.
    pub fn translate_cell(&self, cell: &LatticePoint, v: &LatticePoint) -> Option<LatticePoint> {
        let moved = cell + v;
        self.top_rect().contains(&moved.0).then_some(moved)
    }

    /// Levels of tower `j` whose `W`-window stays inside `R_j`.
    pub fn classify_levels(&self, j: usize, window: &Shape) -> Result<LevelClassification> {
        self.check_level(j)?;
        self.check_window(window)?;
        let rect = self.rect(j);
        let bbox = window.bounding_box().ok_or(Error::EmptyShape)?;
        let lo: Vec<i64> = rect.lo().0.iter().zip(&bbox.lo().0).map(|(a, b)| a - b).collect();
        let hi: Vec<i64> = rect.hi().0.iter().zip(&bbox.hi().0).map(|(a, b)| a - b).collect();
        let good = Rectangle::new(lo, hi).ok();
        let good_count = good.as_ref().map_or(0, Rectangle::len);
        let boundary_count = rect.len() - good_count;
        let bad_mass = Rational::one() - self.level_mass(j) * Rational::from_integer(good_count as i64);
        Ok(LevelClassification { j, good, good_count, boundary_count, bad_mass })
    }

    /// Distribution of tower-`k` names over `W` on the good levels of tower
    /// `j`, with all of `Y_j` lumped into `bad_mass`.
    pub fn name_distribution(&self, k: usize, j: usize, window: &Shape) -> Result<NameDistribution> {
        if k == 0 || k > j {
            return Err(Error::InvalidParameter(format!("need 1 <= k <= j, got k={k}, j={j}")));
        }
        let class = self.classify_levels(j, window)?;
        let rect = self.rect(j);
        let labels = self.relative_labels(j, k);
        let strides = rect.strides();
        let deltas: Vec<i64> = window
            .iter()
            .map(|w| w.0.iter().zip(&strides).map(|(a, s)| a * s).sum())
            .collect();
        let mut counts: Vec<(Vec<u32>, u64)> = match &class.good {
            None => Vec::new(),
            Some(good) => {
                let n = good.len() as usize;
                let map = (0..n)
                    .into_par_iter()
                    .fold(HashMap::<Vec<u32>, u64>::new, |mut acc, g| {
                        let v = good.point_at(g);
                        let base = rect.index_of(&v.0).expect("good level in R_j") as i64;
                        let name: Vec<u32> = deltas.iter().map(|d| labels[(base + d) as usize]).collect();
                        *acc.entry(name).or_insert(0) += 1;
                        acc
                    })
                    .reduce(HashMap::new, merge_counts);
                map.into_iter().collect()
            }
        };
        counts.sort_unstable();
        let unit = self.level_mass(j);
        Ok(NameDistribution {
            window: window.clone(),
            k,
            j,
            entries: counts
                .into_iter()
                .map(|(name, c)| NameEntry { name, mass: unit * Rational::from_integer(c as i64) })
                .collect(),
            bad_mass: class.bad_mass,
            alphabet_size_bound: self.rect(k).len() + 1,
        })
    }

    /// Cell-by-cell oracle for [`name_distribution`](Self::name_distribution)
    /// with `j = K`. Labels come from explicitly enumerated placements, not
    /// from the hierarchical tables.
    pub fn brute_force_name_distribution(&self, k: usize, window: &Shape, budget: u64) -> Result<NameDistribution> {
        self.check_level(k)?;
        self.check_window(window)?;
        let cells = self.cell_count();
        let budget = budget.min(BRUTE_FORCE_BUDGET);
        if cells > budget {
            return Err(Error::BudgetExceeded { needed: cells, budget });
        }
        let mut label: HashMap<LatticePoint, u32> = HashMap::new();
        let rk = self.rect(k);
        for p in self.placements(k).iter() {
            for (i, r) in rk.iter_points().enumerate() {
                label.insert(&r + p, i as u32);
            }
        }
        let top = self.top_rect();
        let mut counts: HashMap<Vec<u32>, u64> = HashMap::new();
        let mut bad = 0u64;
        for v in top.iter_points() {
            let shifted: Vec<LatticePoint> = window.iter().map(|w| &v + w).collect();
            if shifted.iter().all(|c| top.contains(&c.0)) {
                let name = shifted.iter().map(|c| *label.get(c).unwrap_or(&ERROR_LABEL)).collect();
                *counts.entry(name).or_insert(0) += 1;
            } else {
                bad += 1;
            }
        }
        let mut counts: Vec<(Vec<u32>, u64)> = counts.into_iter().collect();
        counts.sort_unstable();
        let unit = self.cell_measure();
        Ok(NameDistribution {
            window: window.clone(),
            k,
            j: self.levels(),
            entries: counts
                .into_iter()
                .map(|(name, c)| NameEntry { name, mass: unit * Rational::from_integer(c as i64) })
                .collect(),
            bad_mass: unit * Rational::from_integer(bad as i64),
            alphabet_size_bound: rk.len() + 1,
        })
    }

    /// Masses of the distinct tower-`k` names seen from cells of `Y_j`.
    /// Window positions leaving `R_K` read as the error label, keeping the
    /// alphabet `R_k ∪ {e}`.
    pub fn bad_name_masses(&self, k: usize, j: usize, window: &Shape) -> Result<Vec<Rational>> {
        if k == 0 || k > self.levels() {
            return Err(Error::InvalidParameter(format!("level {k} outside 1..={}", self.levels())));
        }
        let class = self.classify_levels(j, window)?;
        let top = self.top_rect();
        let rj = self.rect(j);
        let labels_k = self.level_labels(k);
        let labels_j = self.level_labels(j);
        let strides = top.strides();
        let offsets: Vec<&LatticePoint> = window.iter().collect();
        let deltas: Vec<i64> = offsets
            .iter()
            .map(|w| w.0.iter().zip(&strides).map(|(a, s)| a * s).sum())
            .collect();
        let wbox = window.bounding_box().ok_or(Error::EmptyShape)?;
        let n = self.cell_count() as usize;
        let is_good = |idx: usize| match (&class.good, labels_j[idx]) {
            (Some(g), l) if l != ERROR_LABEL => g.contains(&rj.point_at(l as usize).0),
            _ => false,
        };
        let map = (0..n)
            .into_par_iter()
            .fold(HashMap::<Vec<u32>, u64>::new, |mut acc, idx| {
                if is_good(idx) {
                    return acc;
                }
                let x = top.point_at(idx);
                let inside = (0..x.dim())
                    .all(|a| x.0[a] + wbox.lo().0[a] >= top.lo().0[a] && x.0[a] + wbox.hi().0[a] <= top.hi().0[a]);
                let name: Vec<u32> = if inside {
                    deltas.iter().map(|d| labels_k[(idx as i64 + d) as usize]).collect()
                } else {
                    offsets
                        .iter()
                        .map(|w| match top.index_of(&(&x + w).0) {
                            Some(i) => labels_k[i],
                            None => ERROR_LABEL,
                        })
                        .collect()
                };
                *acc.entry(name).or_insert(0) += 1;
                acc
            })
            .reduce(HashMap::new, merge_counts);
        let mut counts: Vec<u64> = map.into_values().collect();
        counts.sort_unstable();
        let unit = self.cell_measure();
        Ok(counts.into_iter().map(|c| unit * Rational::from_integer(c as i64)).collect())
    }

    /// Per-level statistics: `j, cells, q, error_mass` (exact and double).
    pub fn stats_csv(&self) -> String {
        let mut out = String::from("j,cells,q,error_mass,error_mass_f64\n");
        for j in 1..=self.levels() {
            let q = if j < self.levels() { fraction(&self.schedule.coverage(j)) } else { String::new() };
            let e = self.error_mass(j);
            out.push_str(&format!("{j},{},{q},{},{}\n", self.rect(j).len(), fraction(&e), to_f64(&e)));
        }
        out
    }

    fn check_level(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.levels() {
            return Err(Error::InvalidParameter(format!("level {j} outside 1..={}", self.levels())));
        }
        Ok(())
    }

    fn check_window(&self, window: &Shape) -> Result<()> {
        if window.is_empty() {
            return Err(Error::EmptyShape);
        }
        if window.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: window.dim() });
        }
        Ok(())
    }
}

fn merge_counts(mut a: HashMap<Vec<u32>, u64>, b: HashMap<Vec<u32>, u64>) -> HashMap<Vec<u32>, u64> {
    let (mut big, small) = if a.len() >= b.len() { (std::mem::take(&mut a), b) } else { (b, a) };
    for (name, c) in small {
        *big.entry(name).or_insert(0) += c;
    }
    big
}

pub(crate) fn fraction(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub(crate) fn to_f64(q: &Rational) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelClassification {
    pub j: usize,
    /// Good level labels: a sub-rectangle of `R_j`, if nonempty.
    pub good: Option<Rectangle>,
    pub good_count: u64,
    pub boundary_count: u64,
    /// `μ(Y_j)`.
    pub bad_mass: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NameEntry {
    /// Tower-`k` label index at each window point, in window order.
    pub name: Vec<u32>,
    pub mass: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NameDistribution {
    pub window: Shape,
    pub k: usize,
    pub j: usize,
    /// Sorted by name.
    pub entries: Vec<NameEntry>,
    pub bad_mass: Rational,
    /// `|R_k| + 1`.
    pub alphabet_size_bound: u64,
}

impl NameDistribution {
    pub fn good_mass(&self) -> Rational {
        self.entries.iter().fold(Rational::zero(), |acc, e| acc + e.mass)
    }

    pub fn total_mass(&self) -> Rational {
        self.good_mass() + self.bad_mass
    }

    pub fn good_masses(&self) -> Vec<Rational> {
        self.entries.iter().map(|e| e.mass).collect()
    }

    /// Label of window point `i` of entry `e`.
    pub fn label_at(&self, e: usize, i: usize) -> Option<u32> {
        let l = *self.entries.get(e)?.name.get(i)?;
        (l != ERROR_LABEL).then_some(l)
    }
}
