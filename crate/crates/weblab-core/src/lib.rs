//! Numerical laboratory for planar webs built from confocal conics.
//!
//! The crate provides:
//!
//! - exact analytic geometry of confocal conics, bipolar circle pencils,
//!   tangent lines and angle bisectors ([`conics`]),
//! - foliations, webs, leaf-following and the hexagonal closure test
//!   ([`web`]),
//! - transport of the closed first-order systems satisfied by
//!   Abelian-relation coefficients along paths, with loop-defect
//!   diagnostics ([`frobenius`]),
//! - spectral estimation of web rank by polynomial collocation over first
//!   integrals, extraction of relation bases and their Lie arcs ([`rank`]),
//! - projective fitting and classification of the rank-quartic components
//!   ([`quartic`]),
//! - finite-difference residual verification of the differential
//!   identities satisfied by the slope fields ([`pde`]).

pub mod conics;
pub mod frobenius;
pub mod ode;
pub mod pde;
pub mod quartic;
pub mod rank;
pub mod web;

pub use conics::{ConfocalFamily, ConicMember, LineSlopePair, Point, Slope};
pub use frobenius::{FrameState, SystemKind};
pub use quartic::{FittedComponent, ProjectivePoint, QuarticReport};
pub use rank::{AbelianBasisNumeric, CollocationConfig, RankReport};
pub use web::{Foliation, HexagonDefect, SampleBox, Web};

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("point is outside the admissible domain: {0}")]
    Inadmissible(String),
    #[error("leaf left the sampling domain at ({0}, {1})")]
    LeftDomain(f64, f64),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("frame became singular (condition number {0:.3e})")]
    SingularFrame(f64),
    #[error("rank estimation failed: {0}")]
    Rank(String),
    #[error("fit failed: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
