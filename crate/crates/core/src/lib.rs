//! Numerical potential theory on finite signed atomic measures.
//!
//! Riesz and logarithmic potentials, discrete Newtonian and Wiener
//! capacities, truncated Riesz transforms, Cantor-type constructions and
//! estimators for differentiability of potentials in the capacity sense.

pub mod capacity;
pub mod constructions;
pub mod diagnostics;
pub mod error;
pub mod ladder;
pub mod measures;
pub mod potentials;
pub mod summation;

pub use error::{Error, Result};
pub use ladder::{Ladder, LadderReport};
pub use measures::{MeasureFunction, Point, SignedAtomicMeasure};
pub use potentials::KernelSpec;

/// Library version, recorded in experiment outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
