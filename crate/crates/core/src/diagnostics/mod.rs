//! Estimators for differentiability of potentials in the capacity sense.
//!
//! A rung of radius `r` samples the Taylor remainder of the potential on a
//! cubic grid over `B(a, r)`, takes its weak capacity norm and normalises by
//! the discrete capacity of the whole grid (times `r` or `r²` in the weak
//! variants).

mod probe;

pub use probe::{
    cantor_point, thm67_ratio_probe, CounterexampleKind, ProbeOptions, ProbeRung, ProbeSetup,
};

use serde::{Deserialize, Serialize};

use crate::capacity::{cover_capacity_with, weak_cap_norm, CellCover, SampleGrid, SolverOptions, WeakCapNorm};
use crate::error::{Error, Result};
use crate::ladder::{ls_slope, Ladder, LadderReport};
use crate::measures::{check_dim, density_profile, DensityTrend, MeasureFunction, SignedAtomicMeasure};
use crate::potentials::{pv_classify, potential, truncated_hessian, truncated_transform, KernelSpec, PvTolerance, PvVerdict};

/// Which remainder quotient a rung measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffMode {
    /// `|u(x) − u(a) − A·(x − a)| / |x − a|`, normalised by `Cap(B)`.
    Capacity,
    /// The undivided first-order remainder, normalised by `r Cap(B)`.
    WeakCapacity,
    /// Second-order remainder over `|x − a|²`, normalised by `Cap(B)`.
    SecondOrder,
    /// The undivided second-order remainder, normalised by `r² Cap(B)`.
    SecondOrderWeak,
}

impl DiffMode {
    fn is_second_order(self) -> bool {
        matches!(self, DiffMode::SecondOrder | DiffMode::SecondOrderWeak)
    }

    /// Power of `|x − a|` dividing the remainder pointwise.
    fn pointwise_power(self) -> i32 {
        match self {
            DiffMode::Capacity => 1,
            DiffMode::SecondOrder => 2,
            _ => 0,
        }
    }

    /// Power of `r` in the normalisation.
    fn radius_power(self) -> i32 {
        match self {
            DiffMode::WeakCapacity => 1,
            DiffMode::SecondOrderWeak => 2,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffVerdict {
    Differentiable,
    NonDifferentiable,
    Inconclusive,
}

/// Rungs inspected by [`classify_ratios`].
pub const VERDICT_RUNGS: usize = 4;
/// Ratios below this on every inspected rung (and decreasing) mean differentiable.
pub const DIFFERENTIABLE_BELOW: f64 = 0.1;
/// Ratios above this on every inspected rung (and not decreasing) mean non-differentiable.
pub const NON_DIFFERENTIABLE_ABOVE: f64 = 0.3;
/// Rungs used for the density estimate `μ̃`.
pub const DENSITY_RUNGS: usize = 6;

/// Verdict from ratios over a shrinking ladder.
///
/// The last [`VERDICT_RUNGS`] ratios must all be below
/// [`DIFFERENTIABLE_BELOW`] and decreasing (no step grows by more than 10%
/// and the last is at most 3/4 of the first), or all above
/// [`NON_DIFFERENTIABLE_ABOVE`] with the last at least half of the first.
pub fn classify_ratios(ratios: &[f64]) -> DiffVerdict {
    if ratios.len() < VERDICT_RUNGS || ratios.iter().any(|q| !q.is_finite()) {
        return DiffVerdict::Inconclusive;
    }
    let tail = &ratios[ratios.len() - VERDICT_RUNGS..];
    let (first, last) = (tail[0], tail[VERDICT_RUNGS - 1]);
    let decreasing = tail.windows(2).all(|w| w[1] <= 1.1 * w[0]) && last <= 0.75 * first;
    if tail.iter().all(|&q| q < DIFFERENTIABLE_BELOW) && (decreasing || tail.iter().all(|&q| q == 0.0)) {
        DiffVerdict::Differentiable
    } else if tail.iter().all(|&q| q > NON_DIFFERENTIABLE_ABOVE) && last >= 0.5 * first {
        DiffVerdict::NonDifferentiable
    } else {
        DiffVerdict::Inconclusive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct DiffOptions {
    /// Grid cells per ball radius; `None` picks 32 in the plane and 10 in space.
    pub cells_per_radius: Option<f64>,
    /// Truncation for the Taylor coefficients; `None` uses twice the resolution.
    pub eps_min: Option<f64>,
    pub solver: SolverOptions,
    pub pv: PvTolerance,
}


impl DiffOptions {
    pub fn cells_per_radius(&self, dim: usize) -> f64 {
        self.cells_per_radius.unwrap_or(if dim == 2 { 32.0 } else { 10.0 })
    }

    fn eps_min(&self, mu: &SignedAtomicMeasure, ladder: &Ladder) -> f64 {
        match self.eps_min {
            Some(e) => e,
            None if mu.resolution() > 0.0 => 2.0 * mu.resolution(),
            None => ladder.finest() / self.cells_per_radius(mu.dim()),
        }
    }
}

/// Gradient candidate with the principal-value verdict of its transform.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateGradient {
    pub value: Vec<f64>,
    pub eps: f64,
    pub pv: PvVerdict,
}

/// Rungs of the ε ladder behind [`CandidateGradient::pv`].
const GRADIENT_PV_RUNGS: usize = 6;

/// `−c T_ε(a)`, the gradient of the potential with the singular part
/// truncated at `eps_min` (`c = d − 2`, or 1 for the logarithm).
pub fn candidate_gradient(
    mu: &SignedAtomicMeasure,
    k: KernelSpec,
    a: &[f64],
    eps_min: f64,
    tol: PvTolerance,
) -> Result<CandidateGradient> {
    k.check_dim(mu.dim())?;
    check_dim(mu.dim(), a.len())?;
    if eps_min < mu.resolution() {
        return Err(Error::BelowResolution {
            rung: 0,
            scale: eps_min,
            resolution: mu.resolution(),
        });
    }
    let t = truncated_transform(mu, a, eps_min)?;
    let top = eps_min * 2f64.powi(GRADIENT_PV_RUNGS as i32 - 1);
    let ladder = Ladder::geometric(top, 0.5, GRADIENT_PV_RUNGS)?;
    let pv = pv_classify(mu, a, &ladder, tol)?.verdict;
    let c = k.gradient_factor();
    Ok(CandidateGradient {
        value: t.iter().map(|v| -c * v).collect(),
        eps: eps_min,
        pv,
    })
}

/// Taylor polynomial `u(a) + A·(x − a) + Σ B_jk (x − a)_j (x − a)_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaylorModel {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `B`, i.e. half the Hessian.
    pub quadratic: Option<Vec<f64>>,
}

impl TaylorModel {
    pub fn first_order(value: f64, gradient: Vec<f64>) -> Self {
        Self {
            value,
            gradient,
            quadratic: None,
        }
    }

    pub fn eval(&self, a: &[f64], x: &[f64]) -> f64 {
        let d = a.len();
        let mut v = self.value;
        for i in 0..d {
            v += self.gradient[i] * (x[i] - a[i]);
        }
        if let Some(b) = &self.quadratic {
            for i in 0..d {
                for j in 0..d {
                    v += b[i * d + j] * (x[i] - a[i]) * (x[j] - a[j]);
                }
            }
        }
        v
    }
}

/// One rung of a differentiability estimate.
#[derive(Debug, Clone, Serialize)]
pub struct RatioSample {
    pub r: f64,
    pub h: f64,
    pub ratio: f64,
    /// Discrete capacity of the sampled ball.
    pub ball_capacity: f64,
    pub weak: WeakCapNorm,
    pub cells: usize,
    /// Cells dropped because they sit on an atom.
    pub dropped: usize,
}

/// Remainder ratio of an arbitrary function `u` against a Taylor model at
/// one radius. `u` returning `Ok(None)` drops the cell.
pub fn taylor_ratio<F>(
    u: F,
    k: KernelSpec,
    a: &[f64],
    model: &TaylorModel,
    r: f64,
    h: f64,
    mode: DiffMode,
    solver: SolverOptions,
) -> Result<RatioSample>
where
    F: Fn(&[f64]) -> Result<Option<f64>>,
{
    k.check_dim(a.len())?;
    if model.gradient.len() != a.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: model.gradient.len(),
        });
    }
    if mode.is_second_order() && model.quadratic.is_none() {
        return Err(Error::invalid("second-order modes need quadratic coefficients"));
    }
    if !(h > 0.0 && h <= r) {
        return Err(Error::invalid("grid step must lie in (0, r]"));
    }
    let full = CellCover::ball(a, r, h)?;
    let ball_capacity = cover_capacity_with(&full, k, solver)?.into_converged()?.capacity;
    let p = mode.pointwise_power();
    let mut dropped = 0;
    let grid = SampleGrid::ball(a, r, h, |x| {
        Ok(match u(x)? {
            Some(v) => {
                let rem = (v - model.eval(a, x)).abs();
                let dist = x.iter().zip(a).map(|(xi, ai)| (xi - ai).powi(2)).sum::<f64>().sqrt();
                Some(rem / dist.powi(p))
            }
            None => {
                dropped += 1;
                None
            }
        })
    })?;
    let cells = grid.values.len();
    let weak = if cells == 0 {
        return Err(Error::invalid("every grid cell was dropped"));
    } else {
        weak_cap_norm(&grid, k, solver)?
    };
    let ratio = weak.value / (r.powi(mode.radius_power()) * ball_capacity);
    Ok(RatioSample {
        r,
        h,
        ratio,
        ball_capacity,
        weak,
        cells,
        dropped,
    })
}

/// Potential of `μ` at `x`, with cells on an atom dropped.
fn potential_or_drop(mu: &SignedAtomicMeasure, k: KernelSpec, x: &[f64]) -> Result<Option<f64>> {
    match potential(mu, k, x) {
        Ok(v) => Ok(Some(v)),
        Err(Error::EvaluationAtAtom { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Definition-level ratio for the potential of `μ` at radius `r` with grid step `h`.
pub fn first_order_ratio(
    mu: &SignedAtomicMeasure,
    k: KernelSpec,
    a: &[f64],
    gradient: &[f64],
    r: f64,
    h: f64,
    mode: DiffMode,
    solver: SolverOptions,
) -> Result<RatioSample> {
    if mode.is_second_order() {
        return Err(Error::invalid("use second_order_test for second-order modes"));
    }
    let model = TaylorModel::first_order(potential(mu, k, a)?, gradient.to_vec());
    taylor_ratio(|x| potential_or_drop(mu, k, x), k, a, &model, r, h, mode, solver)
}

/// Per-rung ratios with a verdict, plus the Taylor data used.
#[derive(Debug, Clone, Serialize)]
pub struct DiffReport {
    pub point: Vec<f64>,
    pub mode: DiffMode,
    pub model: TaylorModel,
    pub gradient_pv: PvVerdict,
    /// `μ̃(a)` for second-order modes.
    pub density: Option<f64>,
    /// Set when the `μ̃` trend was growing, so the diagonal correction is unreliable.
    pub density_flagged: bool,
    pub rungs: Vec<RatioSample>,
    pub verdict: DiffVerdict,
}

impl DiffReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.rungs.iter().map(|s| s.ratio).collect()
    }
}

fn check_first_order_mode(mode: DiffMode) -> Result<()> {
    if mode.is_second_order() {
        return Err(Error::invalid("diff_test takes a first-order mode; use second_order_test"));
    }
    Ok(())
}

/// First-order estimate along a radius ladder.
pub fn diff_test(
    mu: &SignedAtomicMeasure,
    k: KernelSpec,
    a: &[f64],
    ladder: &Ladder,
    mode: DiffMode,
    opts: DiffOptions,
) -> Result<DiffReport> {
    check_first_order_mode(mode)?;
    k.check_dim(mu.dim())?;
    ladder.check_resolution(mu.resolution())?;
    let grad = candidate_gradient(mu, k, a, opts.eps_min(mu, ladder), opts.pv)?;
    let model = TaylorModel::first_order(potential(mu, k, a)?, grad.value);
    run_ladder(mu, k, a, ladder, mode, opts, model, grad.pv, None, false)
}

#[allow(clippy::too_many_arguments)]
fn run_ladder(
    mu: &SignedAtomicMeasure,
    k: KernelSpec,
    a: &[f64],
    ladder: &Ladder,
    mode: DiffMode,
    opts: DiffOptions,
    model: TaylorModel,
    gradient_pv: PvVerdict,
    density: Option<f64>,
    density_flagged: bool,
) -> Result<DiffReport> {
    let cpr = opts.cells_per_radius(mu.dim());
    let mut rungs = Vec::with_capacity(ladder.len());
    for &r in ladder.scales() {
        rungs.push(taylor_ratio(
            |x| potential_or_drop(mu, k, x),
            k,
            a,
            &model,
            r,
            r / cpr,
            mode,
            opts.solver,
        )?);
    }
    let ratios: Vec<f64> = rungs.iter().map(|s| s.ratio).collect();
    Ok(DiffReport {
        point: a.to_vec(),
        mode,
        model,
        gradient_pv,
        density,
        density_flagged,
        verdict: classify_ratios(&ratios),
        rungs,
    })
}

/// `μ̃(a)`: least-squares slope of `μ(B(a, r))` against `r^d` over the
/// last [`DENSITY_RUNGS`] rungs, and whether the density trend is growing.
pub fn density_estimate(mu: &SignedAtomicMeasure, a: &[f64], ladder: &Ladder) -> Result<(f64, bool)> {
    let d = mu.dim();
    let profile = density_profile(mu, a, MeasureFunction::Power { s: d as f64 }, ladder)?;
    let start = ladder.len().saturating_sub(DENSITY_RUNGS);
    let scales = &ladder.scales()[start..];
    let xs: Vec<f64> = scales.iter().map(|r| r.powi(d as i32)).collect();
    let ys: Vec<f64> = scales.iter().map(|&r| mu.ball_mass(a, r)).collect::<Result<_>>()?;
    let slope = if xs.len() >= 2 { ls_slope(&xs, &ys) } else { ys[0] / xs[0] };
    Ok((slope, profile.verdict == DensityTrend::Growing))
}

/// Second-order estimate. `B` is half the truncated Hessian at `eps_min`
/// plus the local diagonal term `−(d − 2) μ̃` (`−μ̃` in the plane).
pub fn second_order_test(
    mu: &SignedAtomicMeasure,
    k: KernelSpec,
    a: &[f64],
    ladder: &Ladder,
    mode: DiffMode,
    opts: DiffOptions,
) -> Result<DiffReport> {
    k.check_dim(mu.dim())?;
    match mode {
        DiffMode::SecondOrder if mu.dim() < 3 => {
            return Err(Error::invalid("the capacity-sense second-order test needs d >= 3; use the weak variant"))
        }
        DiffMode::SecondOrder | DiffMode::SecondOrderWeak => {}
        _ => return Err(Error::invalid("second_order_test takes a second-order mode")),
    }
    ladder.check_resolution(mu.resolution())?;
    let d = mu.dim();
    let eps = opts.eps_min(mu, ladder);
    let grad = candidate_gradient(mu, k, a, eps, opts.pv)?;
    let (density, flagged) = density_estimate(mu, a, ladder)?;
    let local = -k.gradient_factor() * density;
    let mut b = truncated_hessian(mu, a, eps)?;
    for i in 0..d {
        b[i * d + i] += local;
    }
    b.iter_mut().for_each(|v| *v *= 0.5);
    let model = TaylorModel {
        value: potential(mu, k, a)?,
        gradient: grad.value,
        quadratic: Some(b),
    };
    run_ladder(mu, k, a, ladder, mode, opts, model, grad.pv, Some(density), flagged)
}

/// Density and principal-value signals next to a direct first-order estimate.
#[derive(Debug, Clone, Serialize)]
pub struct Thm1Record {
    pub density_vanishes: bool,
    pub pv_exists: bool,
    /// The two signals predict the verdict of the direct estimate, which is
    /// not inconclusive.
    pub consistent_with_diff_test: bool,
    pub density: LadderReport<DensityTrend>,
    pub pv: LadderReport<PvVerdict>,
    pub diff: DiffReport,
}

/// Density `μ(B(a,r))/r^{d−1}` and principal-value ladders at `a`, checked
/// against [`diff_test`] in capacity mode. Needs `d >= 3`.
pub fn thm1_characterization(
    mu: &SignedAtomicMeasure,
    a: &[f64],
    ladder: &Ladder,
    opts: DiffOptions,
) -> Result<Thm1Record> {
    let d = mu.dim();
    if d < 3 {
        return Err(Error::invalid("the characterisation is stated for d >= 3"));
    }
    let k = KernelSpec::riesz(d)?;
    let density = density_profile(mu, a, MeasureFunction::Power { s: (d - 1) as f64 }, ladder)?;
    let pv = pv_classify(mu, a, ladder, opts.pv)?;
    let diff = diff_test(mu, k, a, ladder, DiffMode::Capacity, opts)?;
    let density_vanishes = density.verdict == DensityTrend::Vanishing;
    let pv_exists = pv.verdict == PvVerdict::Convergent;
    let predicted = density_vanishes && pv_exists;
    let consistent_with_diff_test = diff.verdict != DiffVerdict::Inconclusive
        && predicted == (diff.verdict == DiffVerdict::Differentiable);
    Ok(Thm1Record {
        density_vanishes,
        pv_exists,
        consistent_with_diff_test,
        density,
        pv,
        diff,
    })
}
