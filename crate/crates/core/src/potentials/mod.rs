//! Riesz and logarithmic potentials, their gradients, truncated Riesz
//! transforms and truncated second-derivative integrals, all by direct
//! compensated summation.

mod menger;

use serde::{Deserialize, Serialize};

pub use menger::menger_energy;

use crate::error::{Error, Result};
use crate::ladder::{tail_oscillation, Ladder, LadderReport, TAIL_RUNGS};
use crate::measures::{check_dim, dist2, SignedAtomicMeasure};
use crate::summation::{KahanSum, KahanVec};

/// `1/|x|^{d-2}` in `R^d` (`d >= 3`) or `log(1/|z|)` in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    Riesz { dim: usize },
    Log,
}

impl KernelSpec {
    pub fn riesz(dim: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::invalid("the Riesz kernel needs dimension >= 3"));
        }
        Ok(KernelSpec::Riesz { dim })
    }

    /// The natural kernel of `R^dim`.
    pub fn for_dim(dim: usize) -> Result<Self> {
        match dim {
            2 => Ok(KernelSpec::Log),
            d => Self::riesz(d),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            KernelSpec::Riesz { dim } => dim,
            KernelSpec::Log => 2,
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if let KernelSpec::Riesz { dim: d } = *self {
            if d < 3 {
                return Err(Error::invalid("the Riesz kernel needs dimension >= 3"));
            }
        }
        check_dim(self.dim(), dim)
    }

    /// Kernel value at distance `r > 0`.
    #[inline]
    pub fn at_distance(&self, r: f64) -> f64 {
        match *self {
            KernelSpec::Riesz { dim: 3 } => 1.0 / r,
            KernelSpec::Riesz { dim } => r.powi(-(dim as i32 - 2)),
            KernelSpec::Log => -r.ln(),
        }
    }

    /// Kernel value from a squared distance.
    #[inline]
    pub fn at_dist2(&self, r2: f64) -> f64 {
        match *self {
            KernelSpec::Riesz { dim: 3 } => 1.0 / r2.sqrt(),
            KernelSpec::Riesz { dim } => r2.powf(-(dim as f64 - 2.0) / 2.0),
            KernelSpec::Log => -0.5 * r2.ln(),
        }
    }

    /// Factor `c` in `∇k(x) = -c x / |x|^d`: `d - 2` for Riesz, 1 for log.
    pub fn gradient_factor(&self) -> f64 {
        match *self {
            KernelSpec::Riesz { dim } => dim as f64 - 2.0,
            KernelSpec::Log => 1.0,
        }
    }
}

#[inline]
fn pow_d(r2: f64, d: usize) -> f64 {
    // |x|^d from |x|^2
    match d {
        2 => r2,
        3 => r2 * r2.sqrt(),
        _ => r2.powf(d as f64 / 2.0),
    }
}

/// Atoms per plain partial sum; the partial sums are then compensated.
const BLOCK: usize = 64;
const LANES: usize = 4;

/// `Σ w_i k(x − y_i)`.
pub fn potential(mu: &SignedAtomicMeasure, k: KernelSpec, x: &[f64]) -> Result<f64> {
    k.check_dim(mu.dim())?;
    check_dim(mu.dim(), x.len())?;
    match (mu.dim(), k) {
        (2, KernelSpec::Log) => blocked_sum::<2>(mu, x, |r2| -0.5 * r2.ln()),
        (3, KernelSpec::Riesz { .. }) => blocked_sum::<3>(mu, x, |r2| 1.0 / r2.sqrt()),
        _ => {
            let mut acc = KahanSum::new();
            for (index, (y, w)) in mu.iter().enumerate() {
                let r2 = dist2(x, y);
                if r2 == 0.0 {
                    return Err(Error::EvaluationAtAtom { index });
                }
                acc.add(w * k.at_dist2(r2));
            }
            Ok(acc.value())
        }
    }
}

fn blocked_sum<const D: usize>(mu: &SignedAtomicMeasure, x: &[f64], f: impl Fn(f64) -> f64) -> Result<f64> {
    let x: [f64; D] = std::array::from_fn(|c| x[c]);
    let r2_of = |y: &[f64]| -> f64 {
        let mut r2 = 0.0;
        for c in 0..D {
            let t = x[c] - y[c];
            r2 += t * t;
        }
        r2
    };
    let mut acc = KahanSum::new();
    for (b, (cs, ws)) in mu.coords().chunks(D * BLOCK).zip(mu.weights().chunks(BLOCK)).enumerate() {
        let mut lanes = [0.0; LANES];
        let mut ys = cs.chunks_exact(D * LANES);
        let mut wl = ws.chunks_exact(LANES);
        for (y, w) in (&mut ys).zip(&mut wl) {
            for l in 0..LANES {
                lanes[l] += w[l] * f(r2_of(&y[l * D..(l + 1) * D]));
            }
        }
        let mut s: f64 = lanes.iter().sum();
        for (y, w) in ys.remainder().chunks_exact(D).zip(wl.remainder()) {
            s += w * f(r2_of(y));
        }
        // Both kernels are infinite at distance zero, so a hit shows up here.
        if !s.is_finite() {
            if let Some(i) = cs.chunks_exact(D).position(|y| r2_of(y) == 0.0) {
                return Err(Error::EvaluationAtAtom { index: b * BLOCK + i });
            }
        }
        acc.add(s);
    }
    Ok(acc.value())
}

/// `−c Σ w_i (x − y_i)/|x − y_i|^d` with `c` from [`KernelSpec::gradient_factor`].
pub fn gradient(mu: &SignedAtomicMeasure, k: KernelSpec, x: &[f64]) -> Result<Vec<f64>> {
    k.check_dim(mu.dim())?;
    check_dim(mu.dim(), x.len())?;
    let d = mu.dim();
    let c = k.gradient_factor();
    let mut acc = KahanVec::zeros(d);
    for (index, (y, w)) in mu.iter().enumerate() {
        let r2 = dist2(x, y);
        if r2 == 0.0 {
            return Err(Error::EvaluationAtAtom { index });
        }
        let s = -c * w / pow_d(r2, d);
        for i in 0..d {
            acc.add_at(i, s * (x[i] - y[i]));
        }
    }
    Ok(acc.values())
}

/// `Σ_{|y_i − a| > ε} w_i (a − y_i)/|a − y_i|^d`.
pub fn truncated_transform(mu: &SignedAtomicMeasure, a: &[f64], eps: f64) -> Result<Vec<f64>> {
    Ok(truncated_transform_ladder(mu, a, &[eps])?.remove(0))
}

/// [`truncated_transform`] at every level of a strictly decreasing list of
/// truncations, in one pass over the atoms.
pub fn truncated_transform_ladder(
    mu: &SignedAtomicMeasure,
    a: &[f64],
    eps: &[f64],
) -> Result<Vec<Vec<f64>>> {
    check_dim(mu.dim(), a.len())?;
    if eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::invalid("truncation levels must be positive"));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("truncation levels must decrease strictly"));
    }
    let d = mu.dim();
    let eps2: Vec<f64> = eps.iter().map(|e| e * e).collect();
    // Bucket b collects atoms first counted at level b, i.e. eps[b] < |y - a| <= eps[b-1].
    let mut buckets = vec![KahanVec::zeros(d); eps.len()];
    for (y, w) in mu.iter() {
        let r2 = dist2(a, y);
        let first = eps2.partition_point(|&e2| r2 <= e2);
        if first == eps.len() {
            continue;
        }
        let s = w / pow_d(r2, d);
        let bucket = &mut buckets[first];
        for i in 0..d {
            bucket.add_at(i, s * (a[i] - y[i]));
        }
    }
    let mut out = Vec::with_capacity(eps.len());
    let mut running = vec![KahanSum::new(); d];
    for bucket in &buckets {
        for (acc, v) in running.iter_mut().zip(bucket.values()) {
            acc.add(v);
        }
        out.push(running.iter().map(KahanSum::value).collect());
    }
    Ok(out)
}

/// Outcome of a principal-value ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PvVerdict {
    Convergent,
    NonConvergent,
    Inconclusive,
}

/// Tolerance for [`pv_classify`]: `tol = max(rel · mean tail magnitude, floor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvTolerance {
    pub rel: f64,
    pub floor: f64,
    /// Number of trailing rungs inspected.
    pub window: usize,
    /// Oscillation above `divergence_factor · tol` is non-convergent.
    pub divergence_factor: f64,
}

impl Default for PvTolerance {
    fn default() -> Self {
        Self {
            rel: 1e-3,
            floor: 1e-6,
            window: TAIL_RUNGS,
            divergence_factor: 10.0,
        }
    }
}

impl PvTolerance {
    pub fn with_rel(rel: f64) -> Self {
        Self {
            rel,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel > 0.0 && self.floor > 0.0 && self.divergence_factor >= 1.0 && self.window >= 2) {
            return Err(Error::invalid("principal-value tolerance parameters out of range"));
        }
        Ok(())
    }

    /// Absolute tolerance for a set of ladder values.
    pub fn absolute(&self, values: &[Vec<f64>]) -> f64 {
        let start = values.len().saturating_sub(self.window);
        let tail = &values[start..];
        let mean = tail
            .iter()
            .map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt())
            .sum::<f64>()
            / tail.len().max(1) as f64;
        (self.rel * mean).max(self.floor)
    }

    pub fn classify(&self, values: &[Vec<f64>]) -> (f64, PvVerdict) {
        let osc = tail_oscillation(values, self.window);
        let tol = self.absolute(values);
        let verdict = if osc < tol {
            PvVerdict::Convergent
        } else if osc > self.divergence_factor * tol {
            PvVerdict::NonConvergent
        } else {
            PvVerdict::Inconclusive
        };
        (osc, verdict)
    }
}

/// Truncated transforms along an ε ladder with a convergence verdict.
pub fn pv_classify(
    mu: &SignedAtomicMeasure,
    a: &[f64],
    ladder: &Ladder,
    tol: PvTolerance,
) -> Result<LadderReport<PvVerdict>> {
    tol.validate()?;
    ladder.check_resolution(mu.resolution())?;
    let values = truncated_transform_ladder(mu, a, ladder.scales())?;
    let (oscillation, verdict) = tol.classify(&values);
    Ok(LadderReport {
        scales: ladder.scales().to_vec(),
        values,
        oscillation,
        verdict,
    })
}

/// Full truncated Hessian `H_ij = Σ_{|a−y|>ε} w c (d x_i x_j − δ_ij |x|²)/|x|^{d+2}`
/// with `x = a − y`, row-major.
pub fn truncated_hessian(mu: &SignedAtomicMeasure, a: &[f64], eps: f64) -> Result<Vec<f64>> {
    check_dim(mu.dim(), a.len())?;
    if !(eps > 0.0) {
        return Err(Error::invalid("truncation level must be positive"));
    }
    let d = mu.dim();
    let c = KernelSpec::for_dim(d)?.gradient_factor();
    let df = d as f64;
    let eps2 = eps * eps;
    let mut acc = KahanVec::zeros(d * d);
    let mut x = vec![0.0; d];
    for (y, w) in mu.iter() {
        let r2 = dist2(a, y);
        if r2 <= eps2 {
            continue;
        }
        for i in 0..d {
            x[i] = a[i] - y[i];
        }
        let s = c * w / (pow_d(r2, d) * r2);
        for i in 0..d {
            for j in 0..d {
                let mut v = df * x[i] * x[j];
                if i == j {
                    v -= r2;
                }
                acc.add_at(i * d + j, s * v);
            }
        }
    }
    Ok(acc.values())
}

/// Entry `(i, j)` (0-based) of [`truncated_hessian`].
pub fn second_derivative_truncated(
    mu: &SignedAtomicMeasure,
    a: &[f64],
    i: usize,
    j: usize,
    eps: f64,
) -> Result<f64> {
    let d = mu.dim();
    if i >= d || j >= d {
        return Err(Error::invalid(format!("index ({i}, {j}) out of range for dimension {d}")));
    }
    Ok(truncated_hessian(mu, a, eps)?[i * d + j])
}
