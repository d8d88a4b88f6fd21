//! Rank-one `Z^d` actions built by cutting and stacking, with exact
//! finite-level models, entropy brackets for directional partitions, and
//! labeled-tower algebra.

pub mod entropy;
pub mod error;
pub mod geometry;
pub mod model;
pub mod scan;
pub mod schedule;
pub mod towers;

pub use error::{Error, Result};
pub use geometry::{LatticePoint, Rational, Rectangle, Shape};
pub use model::{build_model, LevelKModel, NameDistribution};
pub use schedule::{ConstructionSchedule, Stage};

pub(crate) fn serialize_rationals<S: serde::Serializer>(
    v: &[Rational],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for q in v {
        seq.serialize_element(&format!("{}/{}", q.numer(), q.denom()))?;
    }
    seq.end()
}

pub(crate) fn serialize_rational<S: serde::Serializer>(
    q: &Rational,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", q.numer(), q.denom()))
}
