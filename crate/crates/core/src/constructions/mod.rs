//! Concrete measures: Cantor canonical measures, sphere measures, and the
//! signed block measures behind the counterexamples.

mod blocks;
mod calderon;
mod cantor;
mod sphere;

pub use blocks::{
    block_measure, default_circle_points, thm6_measure, thm7_classification, thm7_measure, BlockLevel,
    BlockOptions, BlockSpec, ClassifiedSquare, CounterexampleMeasure, MIN_CIRCLE_POINTS,
};
pub use calderon::{calderon_grid_measure, calderon_radius, calderon_vertex_count, CalderonLevel, CalderonMeasure};
pub use cantor::{
    cantor_build, check_doubling, corner_of, generation_ladder, sigma_sequence, square_corners, squares_near, CantorFamily,
    CantorMeasure, CantorSpec, SigmaSequence, CHILD_OFFSETS,
};
pub use sphere::{solid_ball_measure, sphere_measure};

use crate::error::{Error, Result};

/// Hard cap on the number of atoms (or squares) a construction may produce.
pub const ATOM_BUDGET: usize = 1 << 24;

pub(crate) fn check_budget(what: impl Into<String>, needed: f64) -> Result<()> {
    if needed > ATOM_BUDGET as f64 {
        return Err(Error::BudgetExceeded {
            what: what.into(),
            needed,
            budget: ATOM_BUDGET,
        });
    }
    Ok(())
}
