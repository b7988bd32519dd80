//! Construction, evaluation and search of Q_B-optimal two-level factorial
//! designs under the baseline parameterization.
//!
//! The crate is organized around a small set of pure modules:
//!
//! - [`design`]: the `Design` type (n x m matrices over {-1,+1}), codings,
//!   model matrices and the design file format.
//! - [`link`]: the association matrix linking baseline and centered effect
//!   estimators, in exact integer arithmetic.
//! - [`criteria`]: generalized word counts, hereditary model priors and the
//!   Q_B / A_s criteria.
//! - [`optimize`]: coordinate exchange searches and Hadamard column-subset
//!   enumeration.
//! - [`evaluate`]: efficiency ratios, submodel projection reports, pairwise
//!   contours and prior-space region maps.
//! - [`data`]: design matrices and reference tables bundled with the crate.

pub mod criteria;
pub mod data;
pub mod design;
pub mod evaluate;
pub mod link;
pub mod optimize;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty design input")]
    EmptyInput,
    #[error("ragged rows: row {row} has {got} entries, expected {expected}")]
    RaggedRows { row: usize, got: usize, expected: usize },
    #[error("entry {value} in row {row} is outside the {coding} alphabet")]
    BadEntry { value: String, row: usize, coding: &'static str },
    #[error("factor count {m} out of supported range {min}..={max}")]
    FactorCountOutOfRange { m: usize, min: usize, max: usize },
    #[error("model spec references factor {factor} but the design has {m} factors")]
    FactorOutOfRange { factor: usize, m: usize },
    #[error("interaction ({a},{b}) violates strong heredity: both factors must appear in mains")]
    HeredityViolation { a: usize, b: usize },
    #[error("run count {n} must be even for the level-balanced search")]
    OddRunCount { n: usize },
    #[error("matrix is not a Hadamard matrix: H'H != N*I")]
    NotHadamard,
    #[error("invalid prior {value}: must lie in [0,1]")]
    BadPrior { value: f64 },
    #[error("model enumeration would visit {count} models, above the cap {cap}")]
    EnumerationCap { count: u128, cap: u128 },
    #[error("efficiency undefined: reference Q_B is 0 but candidate Q_B is {qb}")]
    ZeroReference { qb: f64 },
    #[error("candidate Q_B {best} exceeds reference Q_B {reference}")]
    BestExceedsReference { best: f64, reference: f64 },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
