//! Four-corner Cantor sets in the unit square and their canonical measures.

use serde::{Deserialize, Serialize};

use super::{check_budget, ATOM_BUDGET};
use crate::error::{Error, Result};
use crate::ladder::Ladder;
use crate::measures::{MeasureFunction, SignedAtomicMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CantorFamily {
    /// `λ_k = (1/4)(1 + β/(k + ⌊β⌋))`, so that `σ_n ≍ n^β / 4^n`.
    Beta { beta: f64 },
    /// `σ_n` solves `Φ(σ_n) = 4^{-n}`.
    Gauge { gauge: MeasureFunction },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CantorSpec {
    pub family: CantorFamily,
    pub generation: usize,
}

/// Side lengths `σ_0 = 1, σ_1, …` stored as `ℓ_k = ln(1/σ_k)`, so deep
/// generations stay representable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaSequence {
    sigma: Vec<f64>,
    log_inv: Vec<f64>,
}

impl SigmaSequence {
    pub fn generations(&self) -> usize {
        self.log_inv.len() - 1
    }

    /// `ln(1/σ_k)`.
    pub fn log_inv(&self, k: usize) -> f64 {
        self.log_inv[k]
    }

    /// `σ_k`; underflows to 0 for deep generations, where only
    /// [`Self::log_inv`] and [`Self::ratio`] stay meaningful.
    pub fn sigma(&self, k: usize) -> f64 {
        self.sigma[k]
    }

    /// `λ_k = σ_k / σ_{k-1}` for `k >= 1`.
    pub fn lambda(&self, k: usize) -> f64 {
        self.ratio(k, k - 1)
    }

    /// `σ_j / σ_k`.
    pub fn ratio(&self, j: usize, k: usize) -> f64 {
        let (a, b) = (self.sigma[j], self.sigma[k]);
        if a.is_normal() && b.is_normal() {
            a / b
        } else {
            (self.log_inv[k] - self.log_inv[j]).exp()
        }
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigma
    }
}

/// Radii `e^{-ℓ}` with `ℓ` on this grid are checked for the doubling bound.
/// The bound is asymptotic, so the grid starts well below the log cutoff.
const DOUBLING_GRID: (f64, f64, usize) = (10.0, 2000.0, 400);

/// Rejects gauges with `Φ(2r)/Φ(r) >= 4` at some radius `r <= e^{-10}`.
pub fn check_doubling(gauge: MeasureFunction) -> Result<()> {
    gauge.validate()?;
    let (lo, hi, n) = DOUBLING_GRID;
    for i in 0..n {
        let ell = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
        let ratio = (gauge.ln_eval_at_log_scale(ell - std::f64::consts::LN_2) - gauge.ln_eval_at_log_scale(ell)).exp();
        if ratio >= 4.0 {
            let r = (-ell).exp();
            return Err(Error::GaugeViolation {
                reason: format!("Φ(2r)/Φ(r) = {ratio} >= 4 at r = {r:e} (ln(1/r) = {ell})"),
            });
        }
    }
    Ok(())
}

/// `σ_0, …, σ_n` for a family.
pub fn sigma_sequence(family: CantorFamily, n: usize) -> Result<SigmaSequence> {
    let mut log_inv = Vec::with_capacity(n + 1);
    let mut sigma = Vec::with_capacity(n + 1);
    log_inv.push(0.0);
    sigma.push(1.0);
    match family {
        CantorFamily::Beta { beta } => {
            if !(beta.is_finite() && beta >= 0.0) {
                return Err(Error::invalid("beta must be finite and non-negative"));
            }
            let shift = beta.floor();
            for k in 1..=n {
                let lambda = 0.25 * (1.0 + beta / (k as f64 + shift));
                log_inv.push(log_inv[k - 1] - lambda.ln());
                sigma.push(sigma[k - 1] * lambda);
            }
        }
        CantorFamily::Gauge { gauge } => {
            check_doubling(gauge)?;
            for k in 1..=n {
                let ell = solve_log_scale(gauge, -(k as f64) * 4f64.ln(), log_inv[k - 1]);
                let lambda = (log_inv[k - 1] - ell).exp();
                if lambda >= 0.5 {
                    return Err(Error::GaugeViolation {
                        reason: format!("λ_{k} = {lambda} is not below 1/2"),
                    });
                }
                log_inv.push(ell);
                sigma.push((-ell).exp());
            }
        }
    }
    Ok(SigmaSequence { sigma, log_inv })
}

/// Bisection for `ln Φ(e^{-ℓ}) = target` with `ℓ > ell_min`.
fn solve_log_scale(gauge: MeasureFunction, target: f64, ell_min: f64) -> f64 {
    let f = |ell: f64| gauge.ln_eval_at_log_scale(ell) - target;
    let mut lo = ell_min;
    let mut hi = ell_min.max(1.0) * 2.0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo < 1e-15 {
            return mid;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Offsets of the four children within a square, in lexicographic `(x, y)` order.
pub const CHILD_OFFSETS: [[f64; 2]; 4] = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];

/// Lower-left corners of all generation-`n` squares, in lexicographic tree order.
pub fn square_corners(seq: &SigmaSequence, n: usize) -> Result<Vec<[f64; 2]>> {
    check_budget(format!("4^{n} squares of generation {n}"), 4f64.powi(n as i32))?;
    let mut corners = vec![[0.0, 0.0]];
    for k in 1..=n {
        let step = seq.sigma(k - 1) - seq.sigma(k);
        let mut next = Vec::with_capacity(corners.len() * 4);
        for c in &corners {
            for o in CHILD_OFFSETS {
                next.push([c[0] + o[0] * step, c[1] + o[1] * step]);
            }
        }
        corners = next;
    }
    Ok(corners)
}

/// Lower-left corner of the square with the given child digits (0..4 per generation).
pub fn corner_of(seq: &SigmaSequence, digits: &[u8]) -> [f64; 2] {
    let mut c = [0.0, 0.0];
    for (k, &d) in digits.iter().enumerate() {
        let step = seq.sigma(k) - seq.sigma(k + 1);
        let o = CHILD_OFFSETS[d as usize];
        c[0] += o[0] * step;
        c[1] += o[1] * step;
    }
    c
}

/// A canonical Cantor measure together with its side-length sequence.
#[derive(Debug, Clone)]
pub struct CantorMeasure {
    pub measure: SignedAtomicMeasure,
    pub sigmas: SigmaSequence,
    pub generation: usize,
}

/// Atoms of weight `4^{-n}` at the centres of the generation-`n` squares.
pub fn cantor_build(spec: CantorSpec) -> Result<CantorMeasure> {
    let n = spec.generation;
    check_budget(format!("generation {n} Cantor measure (4^{n} atoms)"), 4f64.powi(n as i32))?;
    let sigmas = sigma_sequence(spec.family, n)?;
    let corners = square_corners(&sigmas, n)?;
    let half = 0.5 * sigmas.sigma(n);
    let w = 0.25f64.powi(n as i32);
    let coords: Vec<f64> = corners.iter().flat_map(|c| [c[0] + half, c[1] + half]).collect();
    let measure = SignedAtomicMeasure::new(2, coords, vec![w; corners.len()], sigmas.sigma(n))?;
    Ok(CantorMeasure {
        measure,
        sigmas,
        generation: n,
    })
}

/// Truncation levels `ε_j`, `j = from..=to`, halfway between the reach
/// `√2 σ_j` of a generation-`j` square and the gap `σ_{j−1} − 2σ_j` to its
/// siblings. At a centre point, `R_{ε_j}` then sums exactly the atoms outside
/// the point's generation-`j` square once the gap exceeds the reach.
pub fn generation_ladder(seq: &SigmaSequence, from: usize, to: usize) -> Result<Ladder> {
    if from == 0 || from > to || to > seq.generations() {
        return Err(Error::invalid(format!(
            "generation ladder {from}..={to} needs 1 <= from <= to <= {}",
            seq.generations()
        )));
    }
    Ladder::new(
        (from..=to)
            .map(|j| 0.5 * (std::f64::consts::SQRT_2 * seq.sigma(j) + seq.sigma(j - 1) - 2.0 * seq.sigma(j)))
            .collect(),
    )
}

/// Lower-left corners of the generation-`n` squares within distance `radius`
/// of `centre` (pruned tree walk, so `n` may exceed the full-build budget).
pub fn squares_near(seq: &SigmaSequence, n: usize, centre: [f64; 2], radius: f64) -> Result<Vec<[f64; 2]>> {
    let mut stack = vec![([0.0f64, 0.0], 0usize)];
    let mut out = Vec::new();
    while let Some((c, k)) = stack.pop() {
        let side = seq.sigma(k);
        let dx = (centre[0] - c[0].max(centre[0].min(c[0] + side))).abs();
        let dy = (centre[1] - c[1].max(centre[1].min(c[1] + side))).abs();
        if dx * dx + dy * dy > radius * radius {
            continue;
        }
        if k == n {
            out.push(c);
            if out.len() > ATOM_BUDGET {
                return Err(Error::BudgetExceeded {
                    what: format!("generation {n} squares near the window"),
                    needed: out.len() as f64,
                    budget: ATOM_BUDGET,
                });
            }
            continue;
        }
        let step = side - seq.sigma(k + 1);
        for o in CHILD_OFFSETS.iter().rev() {
            stack.push(([c[0] + o[0] * step, c[1] + o[1] * step], k + 1));
        }
    }
    Ok(out)
}
