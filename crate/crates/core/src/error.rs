use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular curve: discriminant of y^2 = x^3 + {a}x + {b} is zero")]
    SingularCurve { a: i64, b: i64 },

    #[error("coefficient arithmetic overflowed 128 bits for a = {a}, b = {b}")]
    CoefficientOverflow { a: i64, b: i64 },

    #[error("bad reduction at p = {p}")]
    BadReduction { p: u64 },

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("{what}: precondition violated ({detail})")]
    Precondition { what: &'static str, detail: String },

    #[error("prime {ell} is ramified in the order of discriminant {disc}")]
    RamifiedPrime { ell: u64, disc: i64 },

    #[error("group of order {order} at level {level} exceeds enumeration budget {budget}")]
    LevelTooLarge { level: u64, order: u64, budget: u64 },

    #[error("modulus {q} does not divide level {level}")]
    Divisibility { q: u64, level: u64 },

    #[error("trace table is empty")]
    EmptyTable,

    #[error("C_E,0 is undefined for a CM curve (supersingular primes are counted by Deuring's law)")]
    CmZeroTrace,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {err:e})")]
    ToleranceNotMet { tol: f64, err: f64 },

    #[error("corrupt trace table: {0}")]
    CorruptFile(String),

    #[error("trace table truncated: need {needed} bytes, found {found}")]
    TruncatedFile { needed: usize, found: usize },

    #[error("config {path}: {msg}")]
    Config { path: PathBuf, msg: String },

    #[error("internal ambiguity in baby-step giant-step at p = {p}")]
    InternalAmbiguity { p: u64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn pre(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Precondition {
            what,
            detail: detail.into(),
        }
    }
}
