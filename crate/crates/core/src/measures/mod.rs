//! Finite signed atomic measures in `R^d` and the gauges used to measure
//! their local size.

mod gauge;
pub mod io;

use serde::Serialize;

pub use gauge::{MeasureFunction, LOG_CUTOFF};

use crate::error::{Error, Result};
use crate::ladder::{ls_slope, tail_oscillation, Ladder, LadderReport, TAIL_RUNGS};
use crate::summation::KahanSum;

/// A point of `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::invalid("points need at least two coordinates"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Weighted points `Σ w_i δ_{x_i}` with pairwise distinct locations.
///
/// `resolution` is the diameter of the cells the atoms stand in for; it is
/// zero for genuinely atomic measures.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedAtomicMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    resolution: f64,
}

impl SignedAtomicMeasure {
    /// Builds a measure from flattened coordinates, merging repeated locations.
    pub fn new(dim: usize, coords: Vec<f64>, weights: Vec<f64>, resolution: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("dimension must be at least 2"));
        }
        if coords.len() != dim * weights.len() {
            return Err(Error::invalid(format!(
                "{} coordinates do not describe {} atoms in dimension {dim}",
                coords.len(),
                weights.len()
            )));
        }
        if !(resolution.is_finite() && resolution >= 0.0) {
            return Err(Error::invalid("resolution must be finite and non-negative"));
        }
        if coords.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::invalid("atom coordinates and weights must be finite"));
        }
        // Fold -0.0 into 0.0 so equal locations compare equal bitwise.
        let coords: Vec<f64> = coords.into_iter().map(|c| c + 0.0).collect();
        let (coords, weights) = merge_duplicates(dim, coords, weights);
        Ok(Self {
            dim,
            coords,
            weights,
            resolution,
        })
    }

    pub fn from_atoms<'a, I>(dim: usize, atoms: I, resolution: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for (x, w) in atoms {
            check_dim(dim, x.len())?;
            coords.extend_from_slice(x);
            weights.push(w);
        }
        Self::new(dim, coords, weights, resolution)
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new(), Vec::new(), 0.0)
    }

    /// Single atom of weight `w` at `x`.
    pub fn dirac(x: &[f64], w: f64) -> Result<Self> {
        Self::new(x.len(), x.to_vec(), vec![w], 0.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn location(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Flattened atom coordinates, `dim` values per atom.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.coords.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    pub fn total_variation(&self) -> f64 {
        crate::summation::sum(self.weights.iter().map(|w| w.abs()))
    }

    /// Signed total mass `Σ w_i`.
    pub fn total_mass(&self) -> f64 {
        crate::summation::sum(self.weights.iter().copied())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.weights.iter().all(|&w| w >= 0.0)
    }

    /// Mass of the open ball `B(a, r)`.
    pub fn ball_mass(&self, a: &[f64], r: f64) -> Result<f64> {
        check_dim(self.dim, a.len())?;
        if !(r > 0.0) {
            return Err(Error::invalid("ball radius must be positive"));
        }
        let r2 = r * r;
        let mut acc = KahanSum::new();
        for (x, w) in self.iter() {
            if dist2(x, a) < r2 {
                acc.add(w);
            }
        }
        Ok(acc.value())
    }

    /// Distance from `a` to the nearest atom (infinite for the empty measure).
    pub fn distance_to_support(&self, a: &[f64]) -> Result<f64> {
        check_dim(self.dim, a.len())?;
        Ok(self
            .coords
            .chunks_exact(self.dim)
            .map(|x| dist2(x, a))
            .fold(f64::INFINITY, f64::min)
            .sqrt())
    }

    /// Largest distance from the origin to an atom.
    pub fn max_norm(&self) -> f64 {
        self.coords
            .chunks_exact(self.dim)
            .map(|x| x.iter().map(|c| c * c).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|w| c * w).collect(),
            ..self.clone()
        }
    }

    pub fn translated(&self, v: &[f64]) -> Result<Self> {
        check_dim(self.dim, v.len())?;
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|x| x.iter().zip(v).map(|(a, b)| a + b))
            .collect();
        Self::new(self.dim, coords, self.weights.clone(), self.resolution)
    }

    /// Pushes atoms forward under `x ↦ λx`; the resolution scales too.
    pub fn dilated(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid("dilation factor must be positive"));
        }
        let coords = self.coords.iter().map(|c| c * lambda).collect();
        Self::new(self.dim, coords, self.weights.clone(), self.resolution * lambda)
    }

    /// Image under the point reflection `y ↦ 2a − y`.
    pub fn reflected_through(&self, a: &[f64]) -> Result<Self> {
        check_dim(self.dim, a.len())?;
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|x| x.iter().zip(a).map(|(y, c)| 2.0 * c - y))
            .collect();
        Self::new(self.dim, coords, self.weights.clone(), self.resolution)
    }

    /// Image under `x ↦ Rx + t` for a `dim × dim` row-major matrix `R`.
    pub fn transformed(&self, rot: &[f64], t: &[f64]) -> Result<Self> {
        check_dim(self.dim, t.len())?;
        check_dim(self.dim * self.dim, rot.len())?;
        let d = self.dim;
        let mut coords = Vec::with_capacity(self.coords.len());
        for x in self.coords.chunks_exact(d) {
            for i in 0..d {
                let row = &rot[i * d..(i + 1) * d];
                coords.push(row.iter().zip(x).map(|(r, c)| r * c).sum::<f64>() + t[i]);
            }
        }
        Self::new(d, coords, self.weights.clone(), self.resolution)
    }

    /// Sum of two measures; the coarser resolution is kept.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        let mut weights = self.weights.clone();
        weights.extend_from_slice(&other.weights);
        Self::new(self.dim, coords, weights, self.resolution.max(other.resolution))
    }

    pub fn with_resolution(mut self, resolution: f64) -> Result<Self> {
        if !(resolution.is_finite() && resolution >= 0.0) {
            return Err(Error::invalid("resolution must be finite and non-negative"));
        }
        self.resolution = resolution;
        Ok(self)
    }
}

/// Merges atoms at bitwise-equal locations into their first occurrence.
fn merge_duplicates(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = weights.len();
    let loc = |i: usize| &coords[i * dim..(i + 1) * dim];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        loc(i)
            .iter()
            .zip(loc(j))
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut target: Vec<usize> = (0..n).collect();
    let mut has_dup = false;
    for k in 1..n {
        let (prev, cur) = (order[k - 1], order[k]);
        if loc(prev) == loc(cur) {
            target[cur] = target[prev];
            has_dup = true;
        }
    }
    if !has_dup {
        return (coords, weights);
    }
    let mut merged = vec![0.0; n];
    for i in 0..n {
        merged[target[i]] += weights[i];
    }
    let mut out_c = Vec::with_capacity(coords.len());
    let mut out_w = Vec::with_capacity(n);
    for i in 0..n {
        if target[i] == i {
            out_c.extend_from_slice(loc(i));
            out_w.push(merged[i]);
        }
    }
    (out_c, out_w)
}

/// Trend of a density ratio along a shrinking ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityTrend {
    Vanishing,
    BoundedPositive,
    Growing,
}

/// Log-log slope beyond which a ratio counts as vanishing (or, negated, growing).
pub const TREND_SLOPE: f64 = 0.5;

/// Classifies ratios taken at decreasing radii.
///
/// The least-squares slope of `ln |ratio|` against `ln r` decides: above
/// `TREND_SLOPE` the ratio vanishes, below `-TREND_SLOPE` it grows. A zero
/// ratio at the finest rung counts as vanishing.
pub fn classify_density(scales: &[f64], ratios: &[f64]) -> DensityTrend {
    match ratios.last() {
        None => return DensityTrend::BoundedPositive,
        Some(&last) if last == 0.0 => return DensityTrend::Vanishing,
        _ => {}
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = scales
        .iter()
        .zip(ratios)
        .filter(|(_, q)| **q != 0.0)
        .map(|(r, q)| (r.ln(), q.abs().ln()))
        .unzip();
    if xs.len() < 2 {
        return DensityTrend::BoundedPositive;
    }
    let slope = ls_slope(&xs, &ys);
    if slope > TREND_SLOPE {
        DensityTrend::Vanishing
    } else if slope < -TREND_SLOPE {
        DensityTrend::Growing
    } else {
        DensityTrend::BoundedPositive
    }
}

/// Ratios `μ(B(a,r)) / h(r)` over the ladder with a trend verdict.
pub fn density_profile(
    mu: &SignedAtomicMeasure,
    a: &[f64],
    h: MeasureFunction,
    ladder: &Ladder,
) -> Result<LadderReport<DensityTrend>> {
    check_dim(mu.dim(), a.len())?;
    h.validate()?;
    ladder.check_resolution(mu.resolution())?;
    let mut ratios = Vec::with_capacity(ladder.len());
    for &r in ladder.scales() {
        ratios.push(mu.ball_mass(a, r)? / h.eval(r));
    }
    let values: Vec<Vec<f64>> = ratios.iter().map(|&q| vec![q]).collect();
    Ok(LadderReport {
        scales: ladder.scales().to_vec(),
        oscillation: tail_oscillation(&values, TAIL_RUNGS),
        verdict: classify_density(ladder.scales(), &ratios),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atoms() -> SignedAtomicMeasure {
        SignedAtomicMeasure::new(2, vec![0.0, 0.0, 1.0, 0.0], vec![1.0, -1.0], 0.0).unwrap()
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(SignedAtomicMeasure::empty(2).unwrap().total_variation(), 0.0);
        assert_eq!(two_atoms().total_variation(), 2.0);
        assert_eq!(two_atoms().total_mass(), 0.0);
    }

    #[test]
    fn ball_is_open() {
        let mu = SignedAtomicMeasure::dirac(&[0.0, 0.0], 1.0).unwrap();
        assert_eq!(mu.ball_mass(&[0.0, 0.0], 0.1).unwrap(), 1.0);
        let mu = SignedAtomicMeasure::dirac(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(mu.ball_mass(&[0.0, 0.0], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn ball_mass_errors() {
        let mu = two_atoms();
        assert!(matches!(
            mu.ball_mass(&[0.0, 0.0, 0.0], 1.0),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
        assert!(mu.ball_mass(&[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn duplicates_merge_in_place() {
        let mu = SignedAtomicMeasure::new(
            2,
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -0.0, 0.0],
            vec![1.0, 2.0, 3.0, 4.0],
            0.0,
        )
        .unwrap();
        assert_eq!(mu.len(), 2);
        assert_eq!(mu.location(0), &[1.0, 0.0]);
        assert_eq!(mu.weights(), &[4.0, 6.0]);
    }

    #[test]
    fn rejects_non_finite_and_ragged_input() {
        assert!(SignedAtomicMeasure::new(2, vec![f64::NAN, 0.0], vec![1.0], 0.0).is_err());
        assert!(SignedAtomicMeasure::new(2, vec![0.0, 0.0], vec![f64::INFINITY], 0.0).is_err());
        assert!(SignedAtomicMeasure::new(2, vec![0.0], vec![1.0], 0.0).is_err());
        assert!(SignedAtomicMeasure::new(1, vec![0.0], vec![1.0], 0.0).is_err());
        assert!(SignedAtomicMeasure::new(2, vec![0.0, 0.0], vec![1.0], -1.0).is_err());
    }

    #[test]
    fn point_atom_density_grows() {
        let mu = SignedAtomicMeasure::dirac(&[0.0, 0.0, 0.0], 1.0).unwrap();
        let ladder = Ladder::dyadic(0.5).unwrap();
        let rep = density_profile(&mu, &[0.0, 0.0, 0.0], MeasureFunction::Power { s: 2.0 }, &ladder).unwrap();
        assert_eq!(rep.verdict, DensityTrend::Growing);
        for (r, v) in rep.scales.iter().zip(rep.scalar_values()) {
            assert!((v - 1.0 / (r * r)).abs() <= 1e-12 * v);
        }
    }

    #[test]
    fn circle_arc_density_is_bounded() {
        let n = 1 << 16;
        let mut coords = Vec::with_capacity(2 * n);
        for k in 0..n {
            let t = std::f64::consts::TAU * k as f64 / n as f64;
            coords.push(t.cos());
            coords.push(t.sin());
        }
        let res = std::f64::consts::TAU / n as f64;
        let mu = SignedAtomicMeasure::new(2, coords, vec![res; n], res).unwrap();
        let ladder = Ladder::geometric(0.25, 0.5, 10).unwrap();
        let rep = density_profile(&mu, &[1.0, 0.0], MeasureFunction::Power { s: 1.0 }, &ladder).unwrap();
        assert_eq!(rep.verdict, DensityTrend::BoundedPositive);
        for (r, v) in rep.scales.iter().zip(rep.scalar_values()) {
            // Arc of the unit circle inside B(a, r) has length 4 asin(r/2).
            let exact = 4.0 * (r / 2.0).asin() / r;
            assert!((v - exact).abs() < 2.0 * res / r + 1e-12, "r={r} v={v} exact={exact}");
        }
    }

    #[test]
    fn density_refuses_sub_resolution_rungs() {
        let mu = SignedAtomicMeasure::dirac(&[0.0, 0.0], 1.0).unwrap().with_resolution(0.01).unwrap();
        let ladder = Ladder::dyadic(1.0).unwrap();
        assert!(matches!(
            density_profile(&mu, &[0.0, 0.0], MeasureFunction::Phi, &ladder),
            Err(Error::BelowResolution { rung: 7, .. })
        ));
    }

    #[test]
    fn far_measure_density_vanishes() {
        let mu = SignedAtomicMeasure::dirac(&[1.0, 0.0, 0.0], 1.0).unwrap();
        let ladder = Ladder::dyadic(0.5).unwrap();
        let rep = density_profile(&mu, &[0.0, 0.0, 0.0], MeasureFunction::Power { s: 2.0 }, &ladder).unwrap();
        assert_eq!(rep.verdict, DensityTrend::Vanishing);
        assert_eq!(rep.oscillation, 0.0);
    }

    #[test]
    fn rigid_transform_and_reflection() {
        let mu = two_atoms();
        let r = mu.reflected_through(&[0.5, 0.5]).unwrap();
        assert_eq!(r.location(1), &[0.0, 1.0]);
        let rot = [0.0, -1.0, 1.0, 0.0];
        let t = mu.transformed(&rot, &[1.0, 1.0]).unwrap();
        assert_eq!(t.location(1), &[1.0, 2.0]);
        let s = mu.plus(&mu.scaled(2.0)).unwrap();
        assert_eq!(s.weights(), &[3.0, -3.0]);
    }
}
