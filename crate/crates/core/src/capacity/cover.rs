use std::collections::{HashMap, HashSet};

use serde::Serialize;

use super::matrix::EnergyMatrix;
use super::solver::SolverOptions;
use super::{check_log_domain, EquilibriumResult};
use crate::error::{Error, Result};
use crate::measures::check_dim;
use crate::potentials::KernelSpec;

/// Axis-aligned cells of side `h`; cell `idx` is centred at `origin + h (idx + 1/2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCover {
    dim: usize,
    h: f64,
    origin: Vec<f64>,
    cells: Vec<Vec<i64>>,
}

impl CellCover {
    /// Cells are sorted and deduplicated.
    pub fn new(dim: usize, h: f64, origin: Vec<f64>, mut cells: Vec<Vec<i64>>) -> Result<Self> {
        check_dim(dim, origin.len())?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid("cell side must be positive"));
        }
        if let Some(c) = cells.iter().find(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: c.len(),
            });
        }
        cells.sort();
        cells.dedup();
        Ok(Self { dim, h, origin, cells })
    }

    /// Cells of side `h` whose centres lie in the open ball `B(centre, r)`,
    /// on the lattice anchored at `centre`.
    pub fn ball(centre: &[f64], r: f64, h: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::invalid("ball radius must be positive"));
        }
        let dim = centre.len();
        let reach = (r / h).ceil() as i64;
        let mut cells = Vec::new();
        let mut idx = vec![-reach; dim];
        let r2 = (r / h) * (r / h);
        loop {
            let d2: f64 = idx.iter().map(|&i| (i as f64 + 0.5) * (i as f64 + 0.5)).sum();
            if d2 < r2 {
                cells.push(idx.clone());
            }
            if !advance(&mut idx, -reach, reach - 1) {
                break;
            }
        }
        Self::new(dim, h, centre.to_vec(), cells)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn cells(&self) -> &[Vec<i64>] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn centre_of(&self, idx: &[i64]) -> Vec<f64> {
        idx.iter()
            .zip(&self.origin)
            .map(|(&i, o)| o + self.h * (i as f64 + 0.5))
            .collect()
    }

    /// Flattened cell centres.
    pub fn centres(&self) -> Vec<f64> {
        self.cells.iter().flat_map(|c| self.centre_of(c)).collect()
    }

    /// Cover restricted to the given cell positions.
    pub fn subset(&self, keep: impl IntoIterator<Item = usize>) -> Self {
        Self {
            dim: self.dim,
            h: self.h,
            origin: self.origin.clone(),
            cells: keep.into_iter().map(|i| self.cells[i].clone()).collect(),
        }
    }

    /// Union with a cover on the same lattice.
    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim || self.h != other.h || self.origin != other.origin {
            return Err(Error::invalid("covers live on different lattices"));
        }
        let mut cells = self.cells.clone();
        cells.extend(other.cells.iter().cloned());
        Self::new(self.dim, self.h, self.origin.clone(), cells)
    }

    /// Positions of cells lacking at least one face neighbour in the cover.
    pub fn boundary_cells(&self) -> Vec<usize> {
        let set: HashSet<&[i64]> = self.cells.iter().map(|c| c.as_slice()).collect();
        let mut probe = vec![0i64; self.dim];
        let mut out = Vec::new();
        for (pos, c) in self.cells.iter().enumerate() {
            probe.copy_from_slice(c);
            let mut interior = true;
            'axes: for ax in 0..self.dim {
                for step in [-1, 1] {
                    probe[ax] = c[ax] + step;
                    if !set.contains(probe.as_slice()) {
                        interior = false;
                        probe[ax] = c[ax];
                        break 'axes;
                    }
                }
                probe[ax] = c[ax];
            }
            if !interior {
                out.push(pos);
            }
        }
        out
    }
}

fn advance(idx: &mut [i64], lo: i64, hi: i64) -> bool {
    for v in idx.iter_mut() {
        if *v < hi {
            *v += 1;
            return true;
        }
        *v = lo;
    }
    false
}

/// Equilibrium problem on the boundary cells of a cover.
///
/// A set and its outer boundary have the same capacity, so interior cells
/// are left out. Planar covers must lie within distance 1/2 of their origin.
pub fn cover_capacity_with(cover: &CellCover, k: KernelSpec, opts: SolverOptions) -> Result<EquilibriumResult> {
    boundary_solve(cover, k, opts, 0.0)
}

/// Discrete capacity of the union of cells.
pub fn capacity_of_cover(cover: &CellCover, k: KernelSpec) -> Result<f64> {
    Ok(cover_capacity_with(cover, k, SolverOptions::default())?.into_converged()?.capacity)
}

/// Wiener capacity of a planar cover whose coordinates are in units of
/// `e^{-log_unit}`: the energy picks up `log_unit` for probability weights.
pub fn cover_capacity_scaled(cover: &CellCover, log_unit: f64, opts: SolverOptions) -> Result<EquilibriumResult> {
    if !(log_unit >= 0.0 && log_unit.is_finite()) {
        return Err(Error::invalid("the frame unit must satisfy 0 < unit <= 1"));
    }
    boundary_solve(cover, KernelSpec::Log, opts, log_unit)
}

fn boundary_solve(cover: &CellCover, k: KernelSpec, opts: SolverOptions, log_unit: f64) -> Result<EquilibriumResult> {
    if cover.is_empty() {
        return Err(Error::invalid("empty cover"));
    }
    k.check_dim(cover.dim())?;
    let boundary = cover.subset(cover.boundary_cells());
    let coords = boundary.centres();
    if k == KernelSpec::Log {
        let local: Vec<f64> = coords.iter().map(|c| c * (-log_unit).exp()).collect();
        let origin: Vec<f64> = cover.origin().iter().map(|c| c * (-log_unit).exp()).collect();
        check_log_domain(2, &local, &origin)?;
    }
    let mut m = EnergyMatrix::assemble(cover.dim(), &coords, cover.h(), k)?;
    if log_unit > 0.0 {
        m.add_constant(log_unit);
    }
    Ok(super::equilibrium_from_matrix(&m, opts))
}

/// Values sampled at the cell centres of a cover.
#[derive(Debug, Clone)]
pub struct SampleGrid {
    pub cover: CellCover,
    pub values: Vec<f64>,
}

impl SampleGrid {
    pub fn new(cover: CellCover, values: Vec<f64>) -> Result<Self> {
        if cover.len() != values.len() {
            return Err(Error::invalid("one value per cell required"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("sample values must not be NaN"));
        }
        Ok(Self { cover, values })
    }

    /// Samples `f` at the cell centres of `CellCover::ball`; cells where `f`
    /// returns `None` are dropped.
    pub fn ball<F>(centre: &[f64], r: f64, h: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Option<f64>>,
    {
        let full = CellCover::ball(centre, r, h)?;
        let mut keep = Vec::with_capacity(full.len());
        let mut values = Vec::with_capacity(full.len());
        for (i, c) in full.cells().iter().enumerate() {
            if let Some(v) = f(&full.centre_of(c))? {
                keep.push(i);
                values.push(v);
            }
        }
        Self::new(full.subset(keep), values)
    }

    /// Like [`SampleGrid::ball`], but each cell takes the minimum of `f` over
    /// its centre and corners, and is dropped if any of them is. When that
    /// minimum is the infimum over the cell, as for the potential of a single
    /// atom, each super-level cover lies inside the true super-level set.
    pub fn ball_cell_minimum<F>(centre: &[f64], r: f64, h: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Option<f64>>,
    {
        let full = CellCover::ball(centre, r, h)?;
        let d = full.dim();
        let mut corners: HashMap<Vec<i64>, Option<f64>> = HashMap::new();
        let mut keep = Vec::with_capacity(full.len());
        let mut values = Vec::with_capacity(full.len());
        'cells: for (i, c) in full.cells().iter().enumerate() {
            let Some(mut v) = f(&full.centre_of(c))? else {
                continue;
            };
            for mask in 0..1usize << d {
                let corner: Vec<i64> = (0..d).map(|j| c[j] + ((mask >> j) & 1) as i64).collect();
                let value = match corners.get(&corner) {
                    Some(&value) => value,
                    None => {
                        let x: Vec<f64> = (0..d).map(|j| centre[j] + h * corner[j] as f64).collect();
                        let value = f(&x)?;
                        corners.insert(corner, value);
                        value
                    }
                };
                match value {
                    Some(u) => v = v.min(u),
                    None => continue 'cells,
                }
            }
            keep.push(i);
            values.push(v);
        }
        Self::new(full.subset(keep), values)
    }
}

/// Ratio between consecutive levels of the coarse ladder in [`weak_cap_norm`].
pub const WEAK_CAP_LADDER_RATIO: f64 = 1.189_207_115_002_721; // 2^{1/4}
/// Sample values examined per refinement round around the best level.
pub const WEAK_CAP_REFINE: usize = 8;
const WEAK_CAP_MAX_ROUNDS: usize = 8;
/// Refinement stops once the levels bracketing the best one are this close.
pub const WEAK_CAP_BRACKET: f64 = 1.01;

#[derive(Debug, Clone, Serialize)]
pub struct WeakCapNorm {
    /// `max_t t · Cap({Q >= t})` over the candidate levels.
    pub value: f64,
    /// Maximising level (0 when every sample is non-positive).
    pub t_star: f64,
    /// `(t, capacity)` per examined level, ascending in `t`.
    pub levels: Vec<(f64, f64)>,
    pub all_converged: bool,
}

/// `sup_t t · Cap({Q >= t})` over sample values `t`.
///
/// The supremum over a finite sample is attained at a sample value. Levels
/// below `max Q · Cap(top set) / Cap(all)` cannot attain it. Above that cut
/// the levels follow a ladder of ratio [`WEAK_CAP_LADDER_RATIO`], each snapped
/// up to a sample value, then the bracket around the best level is narrowed
/// over evenly ranked sample values until it holds no untried value or its
/// ends are within [`WEAK_CAP_BRACKET`]. Level sets sharing a cell count
/// share one solve.
pub fn weak_cap_norm(grid: &SampleGrid, k: KernelSpec, opts: SolverOptions) -> Result<WeakCapNorm> {
    weak_norm_impl(grid, k, opts, 0.0)
}

/// [`weak_cap_norm`] for the logarithmic kernel on a grid whose coordinates
/// are in units of `e^{-log_unit}`.
pub fn weak_cap_norm_scaled(grid: &SampleGrid, log_unit: f64, opts: SolverOptions) -> Result<WeakCapNorm> {
    if !(log_unit >= 0.0 && log_unit.is_finite()) {
        return Err(Error::invalid("the frame unit must satisfy 0 < unit <= 1"));
    }
    weak_norm_impl(grid, KernelSpec::Log, opts, log_unit)
}

fn weak_norm_impl(grid: &SampleGrid, k: KernelSpec, opts: SolverOptions, log_unit: f64) -> Result<WeakCapNorm> {
    if grid.values.is_empty() {
        return Err(Error::invalid("weak capacity norm of an empty sample set"));
    }
    k.check_dim(grid.cover.dim())?;
    let mut order: Vec<usize> = (0..grid.values.len()).filter(|&i| grid.values[i] > 0.0).collect();
    if order.is_empty() {
        return Ok(WeakCapNorm {
            value: 0.0,
            t_star: 0.0,
            levels: Vec::new(),
            all_converged: true,
        });
    }
    order.sort_by(|&i, &j| grid.values[j].total_cmp(&grid.values[i]).then(i.cmp(&j)));
    let sorted: Vec<f64> = order.iter().map(|&i| grid.values[i]).collect();
    // Distinct values, descending.
    let mut distinct = sorted.clone();
    distinct.dedup();

    let mut cache: HashMap<usize, (f64, bool)> = HashMap::new();
    let mut cap_at = |t: f64| -> Result<(f64, bool)> {
        let count = sorted.partition_point(|&v| v >= t);
        if let Some(&hit) = cache.get(&count) {
            return Ok(hit);
        }
        let sub = grid.cover.subset(order[..count].iter().copied());
        let res = boundary_solve(&sub, k, opts, log_unit)?;
        let entry = (res.capacity, res.converged);
        cache.insert(count, entry);
        Ok(entry)
    };
    // Evaluated levels by index into `distinct`.
    let mut seen: std::collections::BTreeMap<usize, (f64, bool)> = Default::default();
    let mut eval = |i: usize, seen: &mut std::collections::BTreeMap<usize, (f64, bool)>| -> Result<()> {
        if let std::collections::btree_map::Entry::Vacant(e) = seen.entry(i) {
            let c = cap_at(distinct[i])?;
            e.insert(c);
        }
        Ok(())
    };

    let hi = distinct[0];
    let last = distinct.len() - 1;
    eval(0, &mut seen)?;
    eval(last, &mut seen)?;
    let cut = hi * seen[&0].0 / seen[&last].0;
    let mut t = hi;
    while t > cut && t > distinct[last] {
        // Smallest sample value >= t.
        let i = distinct.partition_point(|&v| v >= t) - 1;
        eval(i, &mut seen)?;
        t /= WEAK_CAP_LADDER_RATIO;
    }
    for _ in 0..WEAK_CAP_MAX_ROUNDS {
        let best = seen
            .iter()
            .max_by(|x, y| (distinct[*x.0] * x.1 .0).total_cmp(&(distinct[*y.0] * y.1 .0)))
            .map(|(&i, _)| i)
            .expect("at least one level");
        let lo = seen.range(..best).next_back().map_or(best, |(&i, _)| i);
        let up = seen.range(best + 1..).next().map_or(best, |(&i, _)| i);
        let span = up - lo;
        if span <= 2 || distinct[lo] <= WEAK_CAP_BRACKET * distinct[up] {
            break;
        }
        let picks = WEAK_CAP_REFINE.min(span - 1);
        for s in 1..=picks {
            eval(lo + s * span / (picks + 1), &mut seen)?;
        }
    }

    let mut best = (0.0, 0.0);
    let mut all_converged = true;
    let mut levels = Vec::with_capacity(seen.len());
    for (&i, &(cap, ok)) in seen.iter().rev() {
        let t = distinct[i];
        all_converged &= ok;
        levels.push((t, cap));
        if t * cap > best.0 {
            best = (t * cap, t);
        }
    }
    Ok(WeakCapNorm {
        value: best.0,
        t_star: best.1,
        levels,
        all_converged,
    })
}
