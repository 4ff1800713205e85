//! Frobenius trace statistics for elliptic curves over Q and the refined
//! Lang-Trotter predictions for `pi_{E,r}(x)`.
//!
//! The pipeline: [`table::build_table`] counts points, [`galois`] supplies
//! trace-class densities, [`constants`] evaluates `C_{E,r}`, [`density`]
//! integrates the main term `F_{E,r}(x)`, and [`analysis`] compares them.

pub mod analysis;
pub mod arith;
pub mod config;
pub mod constants;
pub mod curve;
pub mod density;
pub mod error;
pub mod galois;
pub mod quad;
pub mod sieve;
pub mod table;
pub mod trace;

pub use config::CurveConfig;
pub use constants::{ConstantProfile, ConstantValue};
pub use curve::{CmClass, RationalCurve, ReducedCurve};
pub use density::DensityModel;
pub use error::{Error, Result};
pub use galois::{CmOrder, GaloisImage};
pub use table::{TraceTable, build_table, load_table, save_table};
pub use trace::TraceRecord;
