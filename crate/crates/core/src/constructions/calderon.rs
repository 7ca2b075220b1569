use serde::Serialize;

use super::blocks::{push_block, MIN_CIRCLE_POINTS};
use super::check_budget;
use crate::error::{Error, Result};
use crate::measures::SignedAtomicMeasure;

/// `(2^{n²} − 1)²` interior vertices of the grid of step `2^{-n²}`.
pub fn calderon_vertex_count(n: usize) -> f64 {
    (2f64.powi((n * n) as i32) - 1.0).powi(2)
}

/// `1/(n 2^{n²})`.
pub fn calderon_radius(n: usize) -> f64 {
    1.0 / (n as f64 * 2f64.powi((n * n) as i32))
}

#[derive(Debug, Clone, Serialize)]
pub struct CalderonLevel {
    pub n: usize,
    pub step: f64,
    pub radius: f64,
    /// `1/(n^{3/2} N_n)` per block.
    pub block_weight: f64,
    /// Vertices that received a block (all of them without a window).
    pub vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct CalderonMeasure {
    pub measure: SignedAtomicMeasure,
    pub levels: Vec<CalderonLevel>,
}

/// Blocks at the interior vertices of the level-`n` grids in the unit
/// square. With a window `(centre, radius)`, only blocks whose discs meet
/// the window are kept; the others contribute nothing inside it.
pub fn calderon_grid_measure(
    levels: &[usize],
    circle_points: usize,
    window: Option<([f64; 2], f64)>,
) -> Result<CalderonMeasure> {
    if levels.is_empty() || levels.contains(&0) {
        return Err(Error::invalid("levels must be a non-empty list of n >= 1"));
    }
    if circle_points < MIN_CIRCLE_POINTS {
        return Err(Error::invalid(format!("blocks need at least {MIN_CIRCLE_POINTS} circle points")));
    }
    let m = circle_points;
    let mut plan = Vec::with_capacity(levels.len());
    let mut total = 0.0;
    for &n in levels {
        let side_count = 2f64.powi((n * n) as i32);
        let step = 1.0 / side_count;
        let radius = calderon_radius(n);
        let (lo, hi) = match window {
            None => (1.0, side_count - 1.0),
            Some((c, r)) => {
                let reach = r + radius;
                let lo = ((c[0].min(c[1]) - reach) / step).floor().max(1.0);
                let hi = ((c[0].max(c[1]) + reach) / step).ceil().min(side_count - 1.0);
                (lo, hi)
            }
        };
        let span = (hi - lo + 1.0).max(0.0);
        check_budget(format!("Calderón level {n}: up to {span}² blocks of {} atoms", m + 1), span * span * (m + 1) as f64)?;
        total += span * span * (m + 1) as f64;
        plan.push((n, step, radius, lo as i64, hi as i64));
    }
    check_budget("all Calderón levels", total)?;

    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut out = Vec::with_capacity(levels.len());
    let mut resolution = f64::INFINITY;
    for (n, step, radius, lo, hi) in plan {
        let block_weight = 1.0 / ((n as f64).powf(1.5) * calderon_vertex_count(n));
        let mut vertices = Vec::new();
        for i in lo..=hi {
            for j in lo..=hi {
                let p = [i as f64 * step, j as f64 * step];
                if let Some((c, r)) = window {
                    let reach = r + radius;
                    if (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) >= reach * reach {
                        continue;
                    }
                }
                push_block(&mut coords, &mut weights, p, radius, m, block_weight);
                vertices.push(p);
            }
        }
        resolution = resolution.min(2.0 * std::f64::consts::PI * radius / m as f64);
        out.push(CalderonLevel {
            n,
            step,
            radius,
            block_weight,
            vertices,
        });
    }
    let measure = if weights.is_empty() {
        SignedAtomicMeasure::empty(2)?
    } else {
        SignedAtomicMeasure::new(2, coords, weights, resolution)?
    };
    Ok(CalderonMeasure { measure, levels: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{potential, KernelSpec};
    use approx::assert_relative_eq;

    #[test]
    fn level_two_grid() {
        assert_eq!(calderon_vertex_count(2), 225.0);
        assert_eq!(calderon_radius(2), 1.0 / 32.0);
        let g = calderon_grid_measure(&[2], 16, None).unwrap();
        assert_eq!(g.levels[0].vertices.len(), 225);
        // Circles of neighbouring blocks touch, so some circle atoms merge.
        assert!(g.measure.len() <= 225 * 17);
        assert!(g.measure.total_mass().abs() < 1e-14);
        assert_relative_eq!(
            g.measure.total_variation(),
            2.0 / 2f64.powf(1.5),
            max_relative = 1e-12
        );
    }

    #[test]
    fn every_level_cancels() {
        let g = calderon_grid_measure(&[1, 2], 32, None).unwrap();
        assert_eq!(g.levels[0].vertices, vec![[0.5, 0.5]]);
        assert!(g.measure.total_mass().abs() < 1e-14);
    }

    #[test]
    fn window_keeps_the_local_potential() {
        let full = calderon_grid_measure(&[2], 64, None).unwrap();
        let c = [0.3, 0.6];
        let win = calderon_grid_measure(&[2], 64, Some((c, 0.05))).unwrap();
        assert!(win.levels[0].vertices.len() < 20);
        for z in [[0.3, 0.6], [0.32, 0.58], [0.28, 0.64]] {
            let a = potential(&full.measure, KernelSpec::Log, &z).unwrap();
            let b = potential(&win.measure, KernelSpec::Log, &z).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn budget_guard_at_level_three() {
        assert!(calderon_grid_measure(&[3], 64, None).unwrap_err().is_budget());
        assert!(calderon_grid_measure(&[3], 16, None).is_ok());
    }
}
