//! Directional entropy scans along time schedules `t_j`, with decay
//! verdicts and `m`-stability tables.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{check_bad_tail, entropy_bracket, y_mass_bound_check, BadMode, EntropyBracket, LogBase, WindowSpec};
use crate::error::{Error, Result};
use crate::geometry::{Rational, Rectangle};
use crate::model::{fraction, to_f64, LevelKModel};

/// Default ratio `last / first` a scan must reach to count as decaying.
pub const DEFAULT_DECAY_FACTOR: f64 = 0.25;

/// Windows are built from `t` rounded down to this many binary digits.
const T_BITS: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeVariant {
    /// `t_j = sqrt(ell_j log ell_j)`.
    TheoremAll,
    /// `t_j = sqrt(s_j log ell_j)`.
    TheoremMain,
}

impl TimeVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeVariant::TheoremAll => "theorem_all",
            TimeVariant::TheoremMain => "theorem_main",
        }
    }
}

/// `t` for one rectangle; needs `ell >= 2`.
pub fn time_value(variant: TimeVariant, rect: &Rectangle) -> Result<f64> {
    let ell = rect.long_side();
    if ell < 2 {
        return Err(Error::InvalidParameter(format!("longest side {ell} < 2 in {rect}")));
    }
    let ell = ell as f64;
    let base = match variant {
        TimeVariant::TheoremAll => ell,
        TimeVariant::TheoremMain => rect.short_side() as f64,
    };
    Ok((base * ell.ln()).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeSchedule {
    pub variant: TimeVariant,
    /// `(j, t_j)`.
    pub values: Vec<(usize, f64)>,
}

/// `t_j` for `R_1, R_2, ...`.
pub fn time_schedule(variant: TimeVariant, rects: &[Rectangle]) -> Result<TimeSchedule> {
    let values = rects
        .iter()
        .enumerate()
        .map(|(i, r)| Ok((i + 1, time_value(variant, r)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TimeSchedule { variant, values })
}

/// Exact dyadic rational just below `t`.
pub fn rational_time(t: f64) -> Rational {
    let scale = 1i64 << T_BITS;
    Rational::new((t * scale as f64).floor() as i64, scale)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub mode: BadMode,
    pub decay_factor: f64,
    /// Also split `Y_j` into atoms and check the bad-level bound.
    pub check_tail: bool,
    /// Rows needing more than this many label lookups are skipped.
    pub work_budget: u64,
    pub log_base: LogBase,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            mode: BadMode::Strict,
            decay_factor: DEFAULT_DECAY_FACTOR,
            check_tail: false,
            work_budget: 1 << 31,
            log_base: LogBase::Natural,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub j: usize,
    #[serde(serialize_with = "crate::serialize_rational")]
    pub m: Rational,
    pub t: f64,
    /// `None` when the row was computed; otherwise why it was skipped.
    pub skipped: Option<String>,
    pub bracket: Option<EntropyBracket>,
    pub summands: Option<[f64; 4]>,
    pub y_bound: Option<f64>,
    pub y_bound_holds: Option<bool>,
}

impl ScanRow {
    pub fn norm_upper(&self) -> Option<f64> {
        self.bracket.as_ref().map(|b| b.normalized_upper)
    }

    /// All inequality checks performed on this row hold.
    pub fn checks_hold(&self) -> bool {
        match &self.bracket {
            None => true,
            Some(b) => {
                b.good_lemma_holds
                    && b.bad_tail.as_ref().map_or(true, |c| c.holds)
                    && self.y_bound_holds.unwrap_or(true)
                    && b.lower <= b.upper
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayVerdict {
    #[serde(serialize_with = "crate::serialize_rational")]
    pub m: Rational,
    pub first_j: usize,
    pub last_j: usize,
    pub first: f64,
    pub last: f64,
    pub ratio: f64,
    pub decays: bool,
    pub strictly_decreasing: bool,
    /// Non-increasing flags for the four summands of the upper estimate.
    pub summands_non_increasing: [bool; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanResult {
    pub schedule_id: String,
    pub levels: usize,
    pub k: usize,
    pub n: usize,
    pub direction: String,
    pub variant: TimeVariant,
    pub decay_factor: f64,
    pub log_base: LogBase,
    pub rows: Vec<ScanRow>,
    /// One verdict per `m` with at least one computed row.
    pub verdicts: Vec<DecayVerdict>,
}

impl ScanResult {
    pub fn feasible_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.bracket.is_some()).count()
    }

    pub fn all_decay(&self) -> bool {
        !self.verdicts.is_empty() && self.verdicts.iter().all(|v| v.decays)
    }

    pub fn all_checks_hold(&self) -> bool {
        self.rows.iter().all(ScanRow::checks_hold)
    }

    pub fn rows_for(&self, m: Rational) -> impl Iterator<Item = &ScanRow> {
        self.rows.iter().filter(move |r| r.m == m)
    }

    pub const CSV_HEADER: &'static str =
        "schedule_id,K,k,j,n,m,t,variant,E_mass,Y_mass,lower,upper,norm_lower,norm_upper,good_rhs,bad_rhs,verdict";

    /// Rows in the fixed column order; entropies in the configured log base,
    /// the two bound columns normalized by `t^n`.
    pub fn to_csv(&self, with_header: bool) -> String {
        let mut out = String::new();
        if with_header {
            out.push_str(Self::CSV_HEADER);
            out.push('\n');
        }
        let lb = |x: f64| self.log_base.from_nats(x);
        for r in &self.rows {
            let prefix = format!(
                "{},{},{},{},{},{},{},{}",
                self.schedule_id,
                self.levels,
                self.k,
                r.j,
                self.n,
                fraction(&r.m),
                r.t,
                self.variant.as_str()
            );
            match (&r.bracket, &r.skipped) {
                (Some(b), _) => {
                    let tn = b.t.powi(b.n as i32);
                    out.push_str(&format!(
                        "{prefix},{},{},{},{},{},{},{},{},{}\n",
                        fraction(&b.e_mass),
                        fraction(&b.bad_mass),
                        lb(b.lower),
                        lb(b.upper),
                        lb(b.normalized_lower),
                        lb(b.normalized_upper),
                        lb(b.good_rhs / tn),
                        lb(b.bad_rhs / tn),
                        if r.checks_hold() { "ok" } else { "violation" }
                    ));
                }
                (None, reason) => {
                    let reason = reason.as_deref().unwrap_or("").replace(',', ";");
                    out.push_str(&format!("{prefix},,,,,,,,,skipped: {reason}\n"));
                }
            }
        }
        out
    }
}

/// Entropy brackets for every `(j, m)` with `t = t_j`, plus decay verdicts.
#[allow(clippy::too_many_arguments)]
pub fn directional_scan(
    model: &LevelKModel,
    schedule_id: &str,
    k: usize,
    spec: &WindowSpec,
    m_list: &[Rational],
    j_range: std::ops::RangeInclusive<usize>,
    variant: TimeVariant,
    opts: &ScanOptions,
) -> Result<ScanResult> {
    if spec.ambient_dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: spec.ambient_dim() });
    }
    if k == 0 || k > model.levels() {
        return Err(Error::InvalidParameter(format!("k={k} outside 1..={}", model.levels())));
    }
    if *j_range.start() < k {
        return Err(Error::InvalidParameter(format!("scan starts at j={} < k={k}", j_range.start())));
    }
    if m_list.is_empty() || m_list.iter().any(|m| *m <= Rational::from_integer(0)) {
        return Err(Error::InvalidParameter("m values must be positive and nonempty".into()));
    }
    let n = spec.n();
    let jobs: Vec<(usize, Rational)> =
        j_range.clone().flat_map(|j| m_list.iter().map(move |m| (j, *m))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(j, m)| scan_row(model, k, j, m, spec, variant, opts))
        .collect::<Result<Vec<_>>>()?;

    let mut ms: Vec<Rational> = m_list.to_vec();
    ms.sort();
    ms.dedup();
    let verdicts = ms
        .iter()
        .filter_map(|&m| {
            let computed: Vec<&ScanRow> = rows.iter().filter(|r| r.m == m && r.bracket.is_some()).collect();
            decay_verdict(model, m, &computed, opts.decay_factor)
        })
        .collect();
    Ok(ScanResult {
        schedule_id: schedule_id.to_string(),
        levels: model.levels(),
        k,
        n,
        direction: spec.label(),
        variant,
        decay_factor: opts.decay_factor,
        log_base: opts.log_base,
        rows,
        verdicts,
    })
}

fn scan_row(
    model: &LevelKModel,
    k: usize,
    j: usize,
    m: Rational,
    spec: &WindowSpec,
    variant: TimeVariant,
    opts: &ScanOptions,
) -> Result<ScanRow> {
    let skipped = |t: f64, reason: String| ScanRow {
        j,
        m,
        t,
        skipped: Some(reason),
        bracket: None,
        summands: None,
        y_bound: None,
        y_bound_holds: None,
    };
    if j > model.levels() {
        return Ok(skipped(f64::NAN, format!("j={j} beyond normalization level {}", model.levels())));
    }
    let t = match time_value(variant, model.rect(j)) {
        Ok(t) => t,
        Err(e) => return Ok(skipped(f64::NAN, e.to_string())),
    };
    let tq = rational_time(t);
    let window = spec.points(tq, m)?;
    let good = model.classify_levels(j, &window)?.good_count;
    let work = window.len() as u64 * good.max(1);
    let tail_work = if opts.check_tail { window.len() as u64 * model.cell_count() } else { 0 };
    if work.max(tail_work) > opts.work_budget {
        return Ok(skipped(t, format!("work {} exceeds budget {}", work.max(tail_work), opts.work_budget)));
    }
    let mut bracket = entropy_bracket(model, k, j, &window, t, spec.n(), opts.mode)?;
    if opts.check_tail {
        check_bad_tail(model, &mut bracket, &window)?;
    }
    let y = y_mass_bound_check(model, j, spec, tq, m)?;
    let summands = bracket.summands(model);
    Ok(ScanRow {
        j,
        m,
        t,
        skipped: None,
        bracket: Some(bracket),
        summands: Some(summands),
        y_bound: Some(y.bound),
        y_bound_holds: Some(y.holds),
    })
}

fn decay_verdict(_model: &LevelKModel, m: Rational, rows: &[&ScanRow], factor: f64) -> Option<DecayVerdict> {
    let first = rows.first()?;
    let last = rows.last()?;
    let vals: Vec<f64> = rows.iter().filter_map(|r| r.norm_upper()).collect();
    let (a, b) = (vals[0], vals[vals.len() - 1]);
    let strictly_decreasing = vals.windows(2).all(|w| w[1] < w[0]);
    let mut summands_non_increasing = [true; 4];
    for (i, flag) in summands_non_increasing.iter_mut().enumerate() {
        let s: Vec<f64> = rows.iter().filter_map(|r| r.summands.map(|x| x[i])).collect();
        *flag = s.windows(2).all(|w| w[1] <= w[0]);
    }
    let ratio = if a > 0.0 { b / a } else { f64::NAN };
    Some(DecayVerdict {
        m,
        first_j: first.j,
        last_j: last.j,
        first: a,
        last: b,
        ratio,
        decays: rows.len() >= 2 && b <= factor * a,
        strictly_decreasing,
        summands_non_increasing,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MStabilityRow {
    pub j: usize,
    /// `(m, normalized_upper, all_bad)`; `None` for skipped rows.
    pub values: Vec<(String, Option<f64>, bool)>,
    /// `(max - min) / max` over computed values.
    pub relative_spread: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MStabilityReport {
    pub m_values: Vec<String>,
    pub rows: Vec<MStabilityRow>,
    /// Highest `j` at which every `m` has a computed row.
    pub top_j: Option<usize>,
    pub top_spread: Option<f64>,
    /// Rows whose whole window lies in `Y_j`.
    pub all_bad_rows: Vec<(usize, String)>,
}

/// Tabulates `normalized_upper` against `m` for each `j`.
pub fn m_stability_report(result: &ScanResult) -> Result<MStabilityReport> {
    let ms: BTreeSet<Rational> = result.rows.iter().map(|r| r.m).collect();
    if ms.len() < 2 {
        return Err(Error::InvalidParameter("m-stability needs at least two values of m".into()));
    }
    let js: BTreeSet<usize> = result.rows.iter().map(|r| r.j).collect();
    let mut all_bad_rows = Vec::new();
    let rows: Vec<MStabilityRow> = js
        .iter()
        .map(|&j| {
            let values: Vec<(String, Option<f64>, bool)> = ms
                .iter()
                .map(|&m| {
                    let row = result.rows.iter().find(|r| r.j == j && r.m == m);
                    let b = row.and_then(|r| r.bracket.as_ref());
                    let all_bad = b.is_some_and(|b| b.bad_mass == Rational::from_integer(1));
                    if all_bad {
                        all_bad_rows.push((j, fraction(&m)));
                    }
                    (fraction(&m), b.map(|b| b.normalized_upper), all_bad)
                })
                .collect();
            let computed: Vec<f64> = values.iter().filter_map(|v| v.1).collect();
            let relative_spread = (computed.len() == values.len()).then(|| {
                let max = computed.iter().cloned().fold(f64::MIN, f64::max);
                let min = computed.iter().cloned().fold(f64::MAX, f64::min);
                if max > 0.0 { (max - min) / max } else { 0.0 }
            });
            MStabilityRow { j, values, relative_spread }
        })
        .collect();
    let top = rows.iter().rev().find(|r| r.relative_spread.is_some());
    Ok(MStabilityReport {
        m_values: ms.iter().map(fraction).collect(),
        top_j: top.map(|r| r.j),
        top_spread: top.and_then(|r| r.relative_spread),
        rows,
        all_bad_rows,
    })
}

/// `μ(Y_j)` as a double, for quick inspection.
pub fn y_mass(row: &ScanRow) -> Option<f64> {
    row.bracket.as_ref().map(|b| to_f64(&b.bad_mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DirectionSubspace;
    use crate::model::{build_model, DEFAULT_CELL_BUDGET};
    use crate::schedule::odometer_schedule;

    #[test]
    fn time_values() {
        let r = Rectangle::new(vec![0, 0], vec![7, 7]).unwrap();
        let a = time_value(TimeVariant::TheoremAll, &r).unwrap();
        let m = time_value(TimeVariant::TheoremMain, &r).unwrap();
        assert_eq!(a, m);
        assert!((a - (7f64 * 7f64.ln()).sqrt()).abs() < 1e-12);
        let flat = Rectangle::new(vec![0, 0], vec![1, 1]).unwrap();
        assert!(time_value(TimeVariant::TheoremMain, &flat).is_err());
        let thin = Rectangle::new(vec![0, 0], vec![20, 2]).unwrap();
        assert!(time_value(TimeVariant::TheoremAll, &thin).unwrap() > time_value(TimeVariant::TheoremMain, &thin).unwrap());
    }

    #[test]
    fn dyadic_time_table() {
        let rects: Vec<Rectangle> = (1..=8).map(|j| Rectangle::cube(2, 1 << j).unwrap()).collect();
        assert!(time_schedule(TimeVariant::TheoremMain, &rects).is_err());
        let s = time_schedule(TimeVariant::TheoremMain, &rects[1..]).unwrap();
        for (i, (j, t)) in s.values.iter().enumerate() {
            assert_eq!(*j, i + 1);
            let ell = ((1i64 << (i + 2)) - 1) as f64;
            assert!((t - (ell * ell.ln()).sqrt()).abs() < 1e-12);
        }
        assert!(s.values.windows(2).all(|w| w[1].1 > w[0].1));
    }

    #[test]
    fn rational_time_rounds_down() {
        let t = 2f64.sqrt();
        let q = rational_time(t);
        assert!(to_f64(&q) <= t && t - to_f64(&q) < 1e-6);
        assert_eq!(rational_time(3.0), Rational::from_integer(3));
    }

    #[test]
    fn small_scan_rows_and_csv() {
        let s = odometer_schedule(2, 2, 6, DEFAULT_CELL_BUDGET).unwrap();
        let model = build_model(&s, 6, DEFAULT_CELL_BUDGET).unwrap();
        let spec = WindowSpec::Slab(DirectionSubspace::axis(2, 0).unwrap());
        let ms = [Rational::from_integer(1), Rational::from_integer(2)];
        let opts = ScanOptions { check_tail: true, ..Default::default() };
        let r = directional_scan(&model, "odo", 1, &spec, &ms, 1..=7, TimeVariant::TheoremMain, &opts).unwrap();
        assert_eq!(r.rows.len(), 14);
        // j=1 has ell=1 and j=7 is beyond K.
        assert!(r.rows.iter().filter(|x| x.j == 1 || x.j == 7).all(|x| x.skipped.is_some()));
        assert_eq!(r.feasible_rows(), 10);
        assert!(r.all_checks_hold());
        assert_eq!(r.verdicts.len(), 2);
        let csv = r.to_csv(true);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], ScanResult::CSV_HEADER);
        assert_eq!(lines.len(), 15);
        assert!(lines[1].starts_with("odo,6,1,1,1,1/1,"));
        assert!(lines[1].contains("skipped"));
        assert_eq!(lines[3].split(',').count(), 17);
        let stab = m_stability_report(&r).unwrap();
        assert_eq!(stab.top_j, Some(6));
    }

    #[test]
    fn scan_is_deterministic() {
        let s = odometer_schedule(2, 2, 6, DEFAULT_CELL_BUDGET).unwrap();
        let model = build_model(&s, 6, DEFAULT_CELL_BUDGET).unwrap();
        let spec = WindowSpec::Slab(DirectionSubspace::new(vec![crate::LatticePoint(vec![1, 1])]).unwrap());
        let ms = [Rational::from_integer(1)];
        let opts = ScanOptions::default();
        let a = directional_scan(&model, "x", 1, &spec, &ms, 2..=6, TimeVariant::TheoremMain, &opts).unwrap();
        let b = directional_scan(&model, "x", 1, &spec, &ms, 2..=6, TimeVariant::TheoremMain, &opts).unwrap();
        assert_eq!(a.to_csv(true), b.to_csv(true));
    }

    #[test]
    fn m_stability_needs_two_values() {
        let s = odometer_schedule(1, 2, 4, DEFAULT_CELL_BUDGET).unwrap();
        let model = build_model(&s, 4, DEFAULT_CELL_BUDGET).unwrap();
        let spec = WindowSpec::Cube { dim: 1 };
        let r = directional_scan(&model, "x", 1, &spec, &[Rational::from_integer(1)], 2..=4, TimeVariant::TheoremAll, &ScanOptions::default())
            .unwrap();
        assert!(m_stability_report(&r).is_err());
    }

    #[test]
    fn huge_m_gives_all_bad_rows() {
        let s = odometer_schedule(2, 2, 5, DEFAULT_CELL_BUDGET).unwrap();
        let model = build_model(&s, 5, DEFAULT_CELL_BUDGET).unwrap();
        let spec = WindowSpec::Slab(DirectionSubspace::axis(2, 0).unwrap());
        let ms = [Rational::from_integer(1), Rational::from_integer(100)];
        let r = directional_scan(&model, "x", 1, &spec, &ms, 2..=5, TimeVariant::TheoremMain, &ScanOptions::default()).unwrap();
        let stab = m_stability_report(&r).unwrap();
        assert_eq!(stab.all_bad_rows.len(), 4);
        assert!(stab.all_bad_rows.iter().all(|(_, m)| m == "100/1"));
    }
}
