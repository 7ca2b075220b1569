//! Measures named by a config: size estimates and construction.

use std::f64::consts::PI;

use potlab::constructions::{
    block_measure, calderon_grid_measure, calderon_vertex_count, cantor_build, check_doubling, solid_ball_measure,
    sphere_measure, thm6_measure, thm7_measure, BlockOptions, BlockSpec, CantorFamily, CantorSpec, SigmaSequence,
    ATOM_BUDGET,
};
use potlab::diagnostics::CounterexampleKind;
use potlab::measures::io;
use potlab::SignedAtomicMeasure;

use crate::config::{LoadedConfig, MeasureSource};
use crate::error::CliError;

pub struct Built {
    pub measure: SignedAtomicMeasure,
    /// Side lengths, for Cantor sources.
    pub sigmas: Option<SigmaSequence>,
}

/// Rejects gauges that fail the doubling bound.
pub fn check_family(family: CantorFamily) -> Result<(), CliError> {
    if let CantorFamily::Gauge { gauge } = family {
        check_doubling(gauge)?;
    }
    Ok(())
}

fn over_budget(what: String, needed: f64) -> Result<(), CliError> {
    if needed > ATOM_BUDGET as f64 {
        return Err(potlab::Error::BudgetExceeded {
            what,
            needed,
            budget: ATOM_BUDGET,
        }
        .into());
    }
    Ok(())
}

/// Dimension and approximate atom count, without building. Fails on
/// budget and gauge violations.
pub fn estimate(src: &MeasureSource, cfg: &LoadedConfig) -> Result<(usize, f64), CliError> {
    let out = match src {
        MeasureSource::File { path } => {
            let mu = io::load(cfg.resolve(path))?;
            (mu.dim(), mu.len() as f64)
        }
        MeasureSource::Atoms { coords, .. } => (coords.first().map_or(0, Vec::len), coords.len() as f64),
        MeasureSource::Sphere { centre, count, .. } => (centre.len(), *count as f64),
        MeasureSource::SolidBall { centre, radius, h, .. } => {
            let d = centre.len();
            let unit_ball = if d == 2 { PI } else { 4.0 * PI / 3.0 };
            (d, unit_ball * (radius / h).powi(d as i32))
        }
        MeasureSource::Segment { cells, .. } => (2, *cells as f64),
        MeasureSource::Square { cells_per_side, .. } => (2, (*cells_per_side as f64).powi(2)),
        MeasureSource::Cantor {
            family,
            generation,
            lift_to_3d,
        } => {
            check_family(*family)?;
            let n = *generation;
            let atoms = 4f64.powi(n as i32);
            over_budget(format!("generation {n} Cantor measure (4^{n} atoms)"), atoms)?;
            (if *lift_to_3d { 3 } else { 2 }, atoms)
        }
        MeasureSource::Block { circle_points, .. } => (2, (circle_points + 1) as f64),
        MeasureSource::Counterexample {
            construction,
            family,
            levels,
            circle_points,
        } => {
            check_family(*family)?;
            let factor = match construction {
                CounterexampleKind::Thm6 => 1,
                CounterexampleKind::Thm7 => 2,
            };
            let mut total = 0.0;
            for &(n, big_n) in levels {
                let g = factor * big_n;
                let name = if factor == 1 { format!("4^N_{n}") } else { format!("4^(2N_{n})") };
                let atoms = 4f64.powi(g as i32) * (circle_points + 1) as f64;
                over_budget(format!("level {n}: {name} = 4^{g} blocks of {} atoms", circle_points + 1), atoms)?;
                total += atoms;
            }
            over_budget("all block levels".into(), total)?;
            (2, total)
        }
        MeasureSource::Calderon { levels, circle_points } => {
            let total: f64 = levels
                .iter()
                .map(|&n| calderon_vertex_count(n) * (circle_points + 1) as f64)
                .sum();
            over_budget(format!("Calderón levels {levels:?}"), total)?;
            (2, total)
        }
    };
    Ok(out)
}

pub fn build(src: &MeasureSource, cfg: &LoadedConfig) -> Result<Built, CliError> {
    estimate(src, cfg)?;
    let plain = |measure| Built { measure, sigmas: None };
    let built = match src {
        MeasureSource::File { path } => plain(io::load(cfg.resolve(path))?),
        MeasureSource::Atoms {
            coords,
            weights,
            resolution,
        } => {
            let dim = coords.first().map_or(0, Vec::len);
            if coords.iter().any(|c| c.len() != dim) {
                return Err(CliError::config("measure.coords rows differ in length"));
            }
            plain(SignedAtomicMeasure::new(dim, coords.concat(), weights.clone(), *resolution)?)
        }
        MeasureSource::Sphere {
            centre,
            radius,
            mass,
            count,
        } => plain(sphere_measure(centre, *radius, *mass, *count)?),
        MeasureSource::SolidBall { centre, radius, h, mass } => plain(solid_ball_measure(centre, *radius, *h, *mass)?),
        MeasureSource::Segment { start, end, cells } => {
            if *cells == 0 {
                return Err(CliError::config("measure.cells must be positive"));
            }
            let n = *cells as f64;
            let coords: Vec<f64> = (0..*cells)
                .flat_map(|i| {
                    let t = (i as f64 + 0.5) / n;
                    [start[0] + t * (end[0] - start[0]), start[1] + t * (end[1] - start[1])]
                })
                .collect();
            let len = (end[0] - start[0]).hypot(end[1] - start[1]);
            plain(SignedAtomicMeasure::new(2, coords, vec![1.0 / n; *cells], len / n)?)
        }
        MeasureSource::Square {
            centre,
            side,
            cells_per_side,
        } => {
            let m = *cells_per_side;
            if m == 0 {
                return Err(CliError::config("measure.cells_per_side must be positive"));
            }
            let h = side / m as f64;
            let at = |i: usize, c: f64| c - side / 2.0 + h * (i as f64 + 0.5);
            let coords: Vec<f64> = (0..m)
                .flat_map(|i| (0..m).flat_map(move |j| [at(i, centre[0]), at(j, centre[1])]))
                .collect();
            plain(SignedAtomicMeasure::new(2, coords, vec![1.0 / (m * m) as f64; m * m], h)?)
        }
        MeasureSource::Cantor {
            family,
            generation,
            lift_to_3d,
        } => {
            let c = cantor_build(CantorSpec {
                family: *family,
                generation: *generation,
            })?;
            let measure = if *lift_to_3d {
                let coords: Vec<f64> = c.measure.coords().chunks(2).flat_map(|p| [p[0], p[1], 0.0]).collect();
                SignedAtomicMeasure::new(3, coords, c.measure.weights().to_vec(), c.measure.resolution())?
            } else {
                c.measure
            };
            Built {
                measure,
                sigmas: Some(c.sigmas),
            }
        }
        MeasureSource::Block {
            centre,
            radius,
            circle_points,
        } => plain(block_measure(*centre, *radius, *circle_points)?),
        MeasureSource::Counterexample {
            construction,
            family,
            levels,
            circle_points,
        } => {
            let spec = BlockSpec {
                family: *family,
                levels: levels.clone(),
            };
            let opts = BlockOptions {
                circle_points: *circle_points,
            };
            let c = match construction {
                CounterexampleKind::Thm6 => thm6_measure(&spec, opts)?,
                CounterexampleKind::Thm7 => thm7_measure(&spec, opts)?,
            };
            Built {
                measure: c.measure,
                sigmas: Some(c.sigmas),
            }
        }
        MeasureSource::Calderon { levels, circle_points } => {
            plain(calderon_grid_measure(levels, *circle_points, None)?.measure)
        }
    };
    Ok(built)
}
