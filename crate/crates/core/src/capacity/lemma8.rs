use serde::Serialize;

use super::cover::{capacity_of_cover, CellCover};
use crate::error::{Error, Result};
use crate::potentials::KernelSpec;

/// Cells per radius of the smallest disc in [`superadditivity_check`].
const CELLS_PER_RADIUS: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Disc {
    pub centre: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuperadditivityReport {
    /// `Cap(∪ B_j) / Σ Cap(B_j)`.
    pub ratio: f64,
    pub union_capacity: f64,
    pub disc_capacities: Vec<f64>,
    /// Largest radius.
    pub sigma: f64,
    /// Smallest gap between two discs (infinite for a single disc).
    pub delta: f64,
    /// Whether `sigma <= delta^N`.
    pub hypothesis_holds: bool,
    pub h: f64,
}

/// Compares the Wiener capacity of a union of disjoint planar discs with the
/// sum of the individual capacities. All discs are discretised on one
/// lattice anchored at the origin, with side `min radius / 32`.
pub fn superadditivity_check(discs: &[Disc]) -> Result<SuperadditivityReport> {
    if discs.is_empty() {
        return Err(Error::invalid("at least one disc is required"));
    }
    for d in discs {
        if !(d.radius > 0.0 && d.radius.is_finite() && d.centre.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("discs need finite centres and positive radii"));
        }
    }
    let mut delta = f64::INFINITY;
    for i in 0..discs.len() {
        for j in 0..i {
            let (a, b) = (&discs[i], &discs[j]);
            let dist = ((a.centre[0] - b.centre[0]).powi(2) + (a.centre[1] - b.centre[1]).powi(2)).sqrt();
            let gap = dist - a.radius - b.radius;
            if gap <= 0.0 {
                return Err(Error::OverlappingDiscs { first: j, second: i });
            }
            delta = delta.min(gap);
        }
    }
    let sigma = discs.iter().map(|d| d.radius).fold(0.0, f64::max);
    let h = discs.iter().map(|d| d.radius).fold(f64::INFINITY, f64::min) / CELLS_PER_RADIUS;

    let k = KernelSpec::Log;
    let mut union: Option<CellCover> = None;
    let mut disc_capacities = Vec::with_capacity(discs.len());
    for d in discs {
        let cover = disc_on_lattice(d, h)?;
        disc_capacities.push(capacity_of_cover(&cover, k)?);
        union = Some(match union {
            None => cover,
            Some(u) => u.union(&cover)?,
        });
    }
    let union_capacity = capacity_of_cover(&union.expect("at least one disc"), k)?;
    let sum: f64 = disc_capacities.iter().sum();
    Ok(SuperadditivityReport {
        ratio: union_capacity / sum,
        union_capacity,
        disc_capacities,
        sigma,
        delta,
        hypothesis_holds: sigma <= delta.powi(discs.len() as i32),
        h,
    })
}

/// Lattice cells (origin-anchored, side `h`) whose centres lie in the open disc.
fn disc_on_lattice(d: &Disc, h: f64) -> Result<CellCover> {
    let lo: Vec<i64> = d.centre.iter().map(|c| ((c - d.radius) / h).floor() as i64 - 1).collect();
    let hi: Vec<i64> = d.centre.iter().map(|c| ((c + d.radius) / h).ceil() as i64 + 1).collect();
    let r2 = d.radius * d.radius;
    let mut cells = Vec::new();
    for i in lo[0]..=hi[0] {
        let x = h * (i as f64 + 0.5) - d.centre[0];
        for j in lo[1]..=hi[1] {
            let y = h * (j as f64 + 0.5) - d.centre[1];
            if x * x + y * y < r2 {
                cells.push(vec![i, j]);
            }
        }
    }
    CellCover::new(2, h, vec![0.0, 0.0], cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_disc_ratio_is_one() {
        let rep = superadditivity_check(&[Disc {
            centre: [0.1, -0.05],
            radius: 0.02,
        }])
        .unwrap();
        assert!((rep.ratio - 1.0).abs() < 1e-12);
        assert!(rep.hypothesis_holds);
    }

    #[test]
    fn overlapping_discs_are_rejected() {
        let discs = [
            Disc { centre: [0.0, 0.0], radius: 0.1 },
            Disc { centre: [0.15, 0.0], radius: 0.1 },
        ];
        assert!(matches!(
            superadditivity_check(&discs),
            Err(Error::OverlappingDiscs { first: 0, second: 1 })
        ));
    }

    #[test]
    fn discs_outside_the_log_domain_are_rejected() {
        let discs = [Disc { centre: [0.45, 0.0], radius: 0.1 }];
        assert!(matches!(superadditivity_check(&discs), Err(Error::LogDomainViolation { .. })));
    }
}
