//! Partition entropy, the Shields bound, and the good/bad-level entropy
//! bracket for directional window partitions.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cube_points, slab_points, DirectionSubspace, Rational, Shape};
use crate::model::{to_f64, LevelKModel};

/// FP slack allowed when comparing an entropy against an analytic bound.
pub const FP_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

impl LogBase {
    /// Converts a value in nats to this base.
    pub fn from_nats(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x,
            LogBase::Two => x / std::f64::consts::LN_2,
        }
    }
}

/// Constant in the bad-level bound: the exact Shields application or the
/// looser printed form with factor 2 and `log |R_k|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BadMode {
    #[default]
    Strict,
    Paper,
}

/// `-p ln p` with `0 ln 0 = 0`.
pub fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// `-Σ p ln p` over the given masses, which need not sum to one.
pub fn entropy_of_masses(masses: &[Rational]) -> f64 {
    masses.iter().map(|q| plogp(to_f64(q))).sum()
}

/// Entropy of a probability vector given as exact rationals summing to 1.
pub fn partition_entropy(dist: &[Rational], base: LogBase) -> Result<f64> {
    if let Some(q) = dist.iter().find(|q| q.is_negative()) {
        return Err(Error::InvalidDistribution(format!("negative mass {q}")));
    }
    let total = dist.iter().fold(Rational::zero(), |a, b| a + b);
    if !total.is_one() {
        return Err(Error::InvalidDistribution(format!("masses sum to {total}, not 1")));
    }
    Ok(base.from_nats(entropy_of_masses(dist)))
}

/// `β ln|M| - β ln β`, zero at `β = 0`.
pub fn shields_bound(beta: f64, m_size: f64) -> f64 {
    shields_bound_ln(beta, m_size.ln())
}

/// [`shields_bound`] with `ln|M|` supplied directly, for alphabets too large
/// to represent.
pub fn shields_bound_ln(beta: f64, ln_m: f64) -> f64 {
    if beta <= 0.0 {
        0.0
    } else {
        beta * ln_m - beta * beta.ln()
    }
}

/// `-ln(1 - μ(E_j)) + Σ_i ln(w_i + 1)`, an upper bound on the entropy of the
/// good atoms.
pub fn lemma_good_rhs(model: &LevelKModel, j: usize) -> Result<f64> {
    let e = model.error_mass(j);
    if e.is_one() {
        return Err(Error::InvalidParameter(format!("error mass of level {j} is 1")));
    }
    let sides: f64 = model.rect(j).sides().iter().map(|&w| ((w + 1) as f64).ln()).sum();
    Ok(-(1.0 - to_f64(&e)).ln() + sides)
}

/// First term of the bad-level bound: `μ(Y)|W| ln(|R_k|+1)` (strict) or
/// `2 μ(Y)|W| ln|R_k|` (paper).
pub fn shields_term(rk_size: u64, window_size: usize, bad_mass: f64, mode: BadMode) -> f64 {
    match mode {
        BadMode::Strict => bad_mass * window_size as f64 * ((rk_size + 1) as f64).ln(),
        BadMode::Paper => 2.0 * bad_mass * window_size as f64 * (rk_size as f64).ln(),
    }
}

/// Upper bound on the entropy of the atoms inside `Y_j`.
pub fn lemma_bad_rhs(model: &LevelKModel, k: usize, window: &Shape, bad_mass: Rational, mode: BadMode) -> f64 {
    let b = to_f64(&bad_mass);
    if b <= 0.0 {
        return 0.0;
    }
    shields_term(model.rect(k).len(), window.len(), b, mode) + plogp(b)
}

/// Window family for a directional scan: a slab along `V` (`n < d`) or the
/// cube `[0, t]^d` (`n = d`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WindowSpec {
    Slab(DirectionSubspace),
    Cube { dim: usize },
}

impl WindowSpec {
    /// Dimension `n` of the direction.
    pub fn n(&self) -> usize {
        match self {
            WindowSpec::Slab(v) => v.dim(),
            WindowSpec::Cube { dim } => *dim,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            WindowSpec::Slab(v) => v.ambient_dim(),
            WindowSpec::Cube { dim } => *dim,
        }
    }

    pub fn points(&self, t: Rational, m: Rational) -> Result<Shape> {
        match self {
            WindowSpec::Slab(v) => slab_points(v, t, m),
            WindowSpec::Cube { dim } => cube_points(t, *dim),
        }
    }

    pub fn label(&self) -> String {
        match self {
            WindowSpec::Slab(v) => v
                .spanning()
                .iter()
                .map(|p| p.0.iter().map(i64::to_string).collect::<Vec<_>>().join(" "))
                .collect::<Vec<_>>()
                .join("|"),
            WindowSpec::Cube { .. } => "cube".into(),
        }
    }
}

/// Entropy of the split names on `Y_j` compared with the bad-level bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BadTailCheck {
    pub tail_entropy: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyBracket {
    pub k: usize,
    pub j: usize,
    pub n: usize,
    pub t: f64,
    pub window_size: usize,
    #[serde(serialize_with = "crate::serialize_rational")]
    pub e_mass: Rational,
    #[serde(serialize_with = "crate::serialize_rational")]
    pub bad_mass: Rational,
    /// Entropy of the good atoms.
    pub good_part: f64,
    /// `-μ(Y) ln μ(Y)`.
    pub lump_term: f64,
    pub shields_term: f64,
    pub lower: f64,
    pub upper: f64,
    pub normalized_lower: f64,
    pub normalized_upper: f64,
    pub good_rhs: f64,
    pub bad_rhs: f64,
    pub good_lemma_holds: bool,
    pub mode: BadMode,
    pub bad_tail: Option<BadTailCheck>,
}

impl EntropyBracket {
    /// The four summands of the normalized upper estimate: error-mass term,
    /// side-length term, Shields term and lump term, each divided by `t^n`.
    pub fn summands(&self, model: &LevelKModel) -> [f64; 4] {
        let tn = self.t.powi(self.n as i32);
        let e = to_f64(&self.e_mass);
        let sides: f64 = model.rect(self.j).sides().iter().map(|&w| ((w + 1) as f64).ln()).sum();
        [-(1.0 - e).ln() / tn, sides / tn, self.shields_term / tn, self.lump_term / tn]
    }
}

/// Bracket on the entropy of the join of the lumped tower-`j` partition with
/// the tower-`k` window partition over `window`. `t` is the scale used for
/// normalization by `t^n`.
pub fn entropy_bracket(
    model: &LevelKModel,
    k: usize,
    j: usize,
    window: &Shape,
    t: f64,
    n: usize,
    mode: BadMode,
) -> Result<EntropyBracket> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let dist = model.name_distribution(k, j, window)?;
    let good_part = entropy_of_masses(&dist.good_masses());
    let b = to_f64(&dist.bad_mass);
    let lump_term = plogp(b);
    let shields = if b > 0.0 { shields_term(model.rect(k).len(), window.len(), b, mode) } else { 0.0 };
    let bad_rhs = lemma_bad_rhs(model, k, window, dist.bad_mass, mode);
    let good_rhs = lemma_good_rhs(model, j).unwrap_or(f64::INFINITY);
    let lower = good_part + lump_term;
    let upper = good_part + bad_rhs;
    let tn = t.powi(n as i32);
    Ok(EntropyBracket {
        k,
        j,
        n,
        t,
        window_size: window.len(),
        e_mass: model.error_mass(j),
        bad_mass: dist.bad_mass,
        good_part,
        lump_term,
        shields_term: shields,
        lower,
        upper,
        normalized_lower: lower / tn,
        normalized_upper: upper / tn,
        good_rhs,
        bad_rhs,
        good_lemma_holds: good_part <= good_rhs + FP_SLACK,
        mode,
        bad_tail: None,
    })
}

/// Entropy of the names seen from `Y_j` with the lump split into atoms.
pub fn bad_tail_entropy(model: &LevelKModel, k: usize, j: usize, window: &Shape) -> Result<f64> {
    Ok(entropy_of_masses(&model.bad_name_masses(k, j, window)?))
}

/// Adds the split-tail comparison to a bracket.
pub fn check_bad_tail(model: &LevelKModel, bracket: &mut EntropyBracket, window: &Shape) -> Result<()> {
    let tail = bad_tail_entropy(model, bracket.k, bracket.j, window)?;
    bracket.bad_tail = Some(BadTailCheck { tail_entropy: tail, rhs: bracket.bad_rhs, holds: tail <= bracket.bad_rhs + FP_SLACK });
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct YMassCheck {
    pub j: usize,
    #[serde(serialize_with = "crate::serialize_rational")]
    pub exact: Rational,
    pub bound: f64,
    pub holds: bool,
}

/// Compares the exact `μ(Y_j)` with the closed-form boundary estimate:
/// `t/w_a + Σ_{i≠a} m/w_i + μ(E_j)` for a coordinate axis `a`,
/// `Σ_{n-tuples} (t+m)^n / Π_{i in tuple} w_i + μ(E_j)` for a general slab and
/// `Σ_i t/w_i + μ(E_j)` for the cube.
pub fn y_mass_bound_check(
    model: &LevelKModel,
    j: usize,
    spec: &WindowSpec,
    t: Rational,
    m: Rational,
) -> Result<YMassCheck> {
    let window = spec.points(t, m)?;
    let exact = model.classify_levels(j, &window)?.bad_mass;
    let w: Vec<f64> = model.rect(j).sides().iter().map(|&x| x as f64).collect();
    let (tf, mf) = (to_f64(&t), to_f64(&m));
    let e = to_f64(&model.error_mass(j));
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::INFINITY };
    let bound = match spec {
        WindowSpec::Cube { .. } => w.iter().map(|&wi| ratio(tf, wi)).sum::<f64>() + e,
        WindowSpec::Slab(v) => match v.coordinate_axis() {
            Some(a) => {
                ratio(tf, w[a])
                    + w.iter().enumerate().filter(|(i, _)| *i != a).map(|(_, &wi)| ratio(mf, wi)).sum::<f64>()
                    + e
            }
            None => {
                let n = v.dim();
                let scale = (tf + mf).powi(n as i32);
                tuples(w.len(), n)
                    .iter()
                    .map(|tuple| ratio(scale, tuple.iter().map(|&i| w[i]).product()))
                    .sum::<f64>()
                    + e
            }
        },
    };
    let holds = to_f64(&exact) <= bound + FP_SLACK;
    Ok(YMassCheck { j, exact, bound, holds })
}

/// All increasing `n`-tuples of `0..d`.
fn tuples(d: usize, n: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, d: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            go(i + 1, d, n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, d, n, &mut Vec::new(), &mut out);
    out
}
