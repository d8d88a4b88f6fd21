//! JSON experiment configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rankone::entropy::{BadMode, LogBase, WindowSpec};
use rankone::geometry::DirectionSubspace;
use rankone::model::DEFAULT_CELL_BUDGET;
use rankone::scan::{ScanOptions, TimeVariant, DEFAULT_DECAY_FACTOR};
use rankone::schedule::{
    eccentric_schedule, exponential_sides, odometer_schedule, spacered_schedule, SpacerGrowth,
};
use rankone::towers::DeltaSchedule;
use rankone::{ConstructionSchedule, LatticePoint, Rational};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schedule: ScheduleSource,
    #[serde(default)]
    pub schedule_id: Option<String>,
    /// Top level of the finite model; defaults to every level of the schedule.
    #[serde(rename = "K", default)]
    pub k_top: Option<usize>,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default)]
    pub directions: Vec<DirectionConfig>,
    #[serde(default = "default_m")]
    pub m_list: Vec<RationalValue>,
    /// Inclusive `[first, last]`; defaults to `[k, K]`.
    #[serde(default)]
    pub j_range: Option<[usize; 2]>,
    #[serde(default = "default_variant")]
    pub variant: TimeVariant,
    #[serde(default)]
    pub log_base: LogBase,
    #[serde(default)]
    pub decay_factor: Option<f64>,
    #[serde(default)]
    pub cell_budget: Option<u64>,
    #[serde(default)]
    pub work_budget: Option<u64>,
    #[serde(default)]
    pub mode: BadMode,
    /// Modes checked by `bounds`; defaults to both.
    #[serde(default)]
    pub modes: Option<Vec<BadMode>>,
    #[serde(default)]
    pub check_tail: bool,
    #[serde(default)]
    pub expect: Expectation,
    #[serde(default)]
    pub eccentricity_threshold: Option<f64>,
    #[serde(default)]
    pub refine: Option<RefineConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub test_hooks: TestHooks,
}

fn one() -> usize {
    1
}

fn default_m() -> Vec<RationalValue> {
    vec![RationalValue::Int(1)]
}

fn default_variant() -> TimeVariant {
    TimeVariant::TheoremMain
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSource {
    Odometer {
        dim: usize,
        #[serde(default = "two")]
        base: i64,
        levels: usize,
    },
    Spacered {
        dim: usize,
        #[serde(default)]
        growth: Option<SpacerGrowth>,
        levels: usize,
    },
    /// Sides `⌊exp(beta (j + 1))⌋ x (j + 1) x ...`.
    Eccentric { dim: usize, beta: f64, levels: usize },
    /// Explicit side vectors, packed stage by stage.
    Sides { sides: Vec<Vec<i64>> },
    File { path: PathBuf },
    Inline { schedule: ConstructionSchedule },
}

fn two() -> i64 {
    2
}

/// A direction is either `"cube"` or a list of spanning vectors.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum DirectionConfig {
    Named(String),
    Vectors(Vec<Vec<i64>>),
}

/// An integer or a `"p/q"` string.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum RationalValue {
    Int(i64),
    Text(String),
}

impl RationalValue {
    pub fn to_rational(&self) -> Result<Rational, CliError> {
        match self {
            RationalValue::Int(i) => Ok(Rational::from_integer(*i)),
            RationalValue::Text(s) => {
                Rational::from_str(s.trim()).map_err(|_| CliError::Config(format!("not a rational: {s:?}")))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    #[default]
    Decay,
    /// The schedule is expected not to decay; the verdict passes when it doesn't.
    NoDecay,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    /// The space is `[0, 2^top - 1]`.
    pub top: u32,
    pub levels: Vec<usize>,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default)]
    pub deltas: Option<DeltaConfig>,
    #[serde(default)]
    pub swaps: Option<Vec<usize>>,
}

fn default_depth() -> usize {
    4
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum DeltaConfig {
    Named(String),
    Explicit(Vec<RationalValue>),
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestHooks {
    /// `[j, factor]`: inflate the copy count of level `j`.
    #[serde(default)]
    pub corrupt_copies: Option<(usize, u64)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn cell_budget(&self) -> u64 {
        self.cell_budget.unwrap_or(DEFAULT_CELL_BUDGET)
    }

    /// Loads or builds the schedule. Relative file paths resolve against `base_dir`.
    pub fn schedule(&self, base_dir: &Path) -> Result<ConstructionSchedule, CliError> {
        let budget = self.cell_budget();
        let built = match &self.schedule {
            ScheduleSource::Odometer { dim, base, levels } => odometer_schedule(*dim, *base, *levels, budget),
            ScheduleSource::Spacered { dim, growth, levels } => {
                spacered_schedule(*dim, growth.unwrap_or_default(), *levels, budget)
            }
            ScheduleSource::Eccentric { dim, beta, levels } => {
                exponential_sides(*dim, *beta, *levels).and_then(|s| eccentric_schedule(&s, budget))
            }
            ScheduleSource::Sides { sides } => eccentric_schedule(sides, budget),
            ScheduleSource::File { path } => {
                let path = base_dir.join(path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                ConstructionSchedule::from_json(&text)
            }
            ScheduleSource::Inline { schedule } => Ok(schedule.clone()),
        };
        built.map_err(CliError::from_setup)
    }

    pub fn schedule_id(&self) -> String {
        if let Some(id) = &self.schedule_id {
            return id.clone();
        }
        match &self.schedule {
            ScheduleSource::Odometer { dim, base, levels } => format!("odometer_d{dim}_b{base}_L{levels}"),
            ScheduleSource::Spacered { dim, levels, .. } => format!("spacered_d{dim}_L{levels}"),
            ScheduleSource::Eccentric { dim, beta, levels } => format!("eccentric_d{dim}_beta{beta}_L{levels}"),
            ScheduleSource::Sides { sides } => format!("sides_L{}", sides.len()),
            ScheduleSource::File { .. } => "file".into(),
            ScheduleSource::Inline { .. } => "inline".into(),
        }
    }

    pub fn window_specs(&self, dim: usize) -> Result<Vec<WindowSpec>, CliError> {
        if self.directions.is_empty() {
            return Err(CliError::Config("no directions given".into()));
        }
        self.directions
            .iter()
            .map(|d| match d {
                DirectionConfig::Named(name) if name == "cube" => Ok(WindowSpec::Cube { dim }),
                DirectionConfig::Named(name) => Err(CliError::Config(format!("unknown direction {name:?}"))),
                DirectionConfig::Vectors(vs) => {
                    let v = DirectionSubspace::new(vs.iter().cloned().map(LatticePoint).collect())
                        .map_err(|e| CliError::Config(format!("direction {vs:?}: {e}")))?;
                    if v.ambient_dim() != dim {
                        return Err(CliError::Config(format!(
                            "direction {vs:?} lives in dimension {}, schedule in {dim}",
                            v.ambient_dim()
                        )));
                    }
                    Ok(WindowSpec::Slab(v))
                }
            })
            .collect()
    }

    pub fn m_values(&self) -> Result<Vec<Rational>, CliError> {
        let ms = self.m_list.iter().map(RationalValue::to_rational).collect::<Result<Vec<_>, _>>()?;
        if ms.is_empty() || ms.iter().any(|m| *m <= Rational::from_integer(0)) {
            return Err(CliError::Config("m_list must hold positive values".into()));
        }
        Ok(ms)
    }

    pub fn scan_options(&self, mode: BadMode, check_tail: bool) -> ScanOptions {
        let defaults = ScanOptions::default();
        ScanOptions {
            mode,
            decay_factor: self.decay_factor.unwrap_or(DEFAULT_DECAY_FACTOR),
            check_tail,
            work_budget: self.work_budget.unwrap_or(defaults.work_budget),
            log_base: self.log_base,
        }
    }

    /// `(K, j_first, j_last)` checked against the schedule depth.
    pub fn levels(&self, schedule_levels: usize) -> Result<(usize, usize, usize), CliError> {
        let k_top = self.k_top.unwrap_or(schedule_levels);
        if k_top == 0 || k_top > schedule_levels {
            return Err(CliError::Config(format!("K={k_top} outside 1..={schedule_levels}")));
        }
        let [first, last] = self.j_range.unwrap_or([self.k, k_top]);
        if self.k == 0 || self.k > first || first > last || last > k_top {
            return Err(CliError::Config(format!(
                "need 1 <= k <= j_first <= j_last <= K, got k={}, j=[{first}, {last}], K={k_top}",
                self.k
            )));
        }
        Ok((k_top, first, last))
    }
}

impl RefineConfig {
    pub fn delta_schedule(&self) -> Result<DeltaSchedule, CliError> {
        match &self.deltas {
            None => Ok(DeltaSchedule::Geometric),
            Some(DeltaConfig::Named(n)) if n == "geometric" => Ok(DeltaSchedule::Geometric),
            Some(DeltaConfig::Named(n)) => Err(CliError::Config(format!("unknown delta schedule {n:?}"))),
            Some(DeltaConfig::Explicit(vs)) => {
                let v = vs.iter().map(RationalValue::to_rational).collect::<Result<Vec<_>, _>>()?;
                if v.is_empty() || v.iter().any(|d| *d <= Rational::from_integer(0)) {
                    return Err(CliError::Config("deltas must be positive".into()));
                }
                Ok(DeltaSchedule::Explicit(v))
            }
        }
    }
}
