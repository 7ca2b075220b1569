//! Ratio probes for the block counterexamples at radii `r_k = √2 σ_{N_k}`.
//!
//! The radii reach far below the smallest positive double, so each rung
//! works in a frame anchored at the generation-`N_k` square of `a` with unit
//! `σ_{N_k}`; the logarithmic kernel then carries an additive `ln(1/σ_{N_k})`.
//! Inside the window only level-`k` blocks are kept: lower levels are
//! certified to stay outside it and higher levels only enlarge the
//! super-level sets. Blocks are evaluated through their continuous
//! potential `w log(ρ/|z − p|)_+`.

use serde::{Deserialize, Serialize};

use super::DiffMode;
use crate::capacity::{
    cover_capacity_scaled, equilibrium_from_matrix, weak_cap_norm_scaled, CellCover, EnergyMatrix, SampleGrid,
    SolverOptions, C_SELF,
};
use crate::constructions::{corner_of, sigma_sequence, BlockSpec, CantorFamily, SigmaSequence, ATOM_BUDGET, CHILD_OFFSETS};
use crate::error::{Error, Result};
use crate::measures::MeasureFunction;
use crate::potentials::KernelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterexampleKind {
    /// Blocks below every generation-`N_n` square, weak capacity ratio.
    Thm6,
    /// Blocks below every generation-`2N_n` square, capacity ratio.
    Thm7,
}

impl CounterexampleKind {
    fn factor(self) -> usize {
        match self {
            CounterexampleKind::Thm6 => 1,
            CounterexampleKind::Thm7 => 2,
        }
    }

    pub fn mode(self) -> DiffMode {
        match self {
            CounterexampleKind::Thm6 => DiffMode::WeakCapacity,
            CounterexampleKind::Thm7 => DiffMode::Capacity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSetup {
    pub kind: CounterexampleKind,
    pub spec: BlockSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    /// Cells per radius for the window grid, the ball and each zoomed component.
    pub cells_per_radius: f64,
    /// Levels of the zoomed super-level ladder (each doubles `t`).
    pub zoom_doublings: usize,
    pub solver: SolverOptions,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            cells_per_radius: 32.0,
            zoom_doublings: 40,
            solver: SolverOptions::default(),
        }
    }
}

/// One `k` of a probe. Normalised quantities use the block potential
/// divided by the block weight (and, in capacity mode, `|z − a|` in frame units).
#[derive(Debug, Clone, Serialize)]
pub struct ProbeRung {
    pub k: usize,
    pub big_n: usize,
    pub mode: DiffMode,
    /// `ln(1/r_k)`.
    pub log_inv_radius: f64,
    pub blocks_in_window: usize,
    /// Normalised `sup_t t Cap` from the uniform window grid.
    pub grid_sup: f64,
    /// Normalised `sup_t t Cap` from super-level sets discretised at their own scale.
    pub zoom_sup: f64,
    /// Normalised level attaining the larger of the two.
    pub t_star: f64,
    pub ball_capacity: f64,
    pub ln_ratio: f64,
    pub ratio: f64,
    /// Constant-free lower-bound trend: `M(σ_{N_k})/k²` for `thm6` or, for `thm7`,
    /// `k^{-2} min M(σ_N) ln(1/σ_{N_k}) Σ_l ln^{-2}(1/σ_{N_k+l−1})`.
    pub ln_predicted: f64,
    pub predicted: f64,
}

/// Centre of the square addressed by `digits`.
pub fn cantor_point(seq: &SigmaSequence, digits: &[u8]) -> [f64; 2] {
    let c = corner_of(seq, digits);
    let half = 0.5 * seq.sigma(digits.len());
    [c[0] + half, c[1] + half]
}

/// Corner of the square `digits` relative to its generation-`from` ancestor,
/// in units of `σ_unit`.
fn offset_units(seq: &SigmaSequence, digits: &[u8], from: usize, unit: usize) -> [f64; 2] {
    let mut c = [0.0, 0.0];
    for j in from + 1..=digits.len() {
        let step = seq.ratio(j - 1, unit) - seq.ratio(j, unit);
        if step == 0.0 {
            break;
        }
        let o = CHILD_OFFSETS[digits[j - 1] as usize];
        c[0] += o[0] * step;
        c[1] += o[1] * step;
    }
    c
}

fn square_index(digits: &[u8]) -> usize {
    digits
        .iter()
        .fold(0usize, |acc, &d| acc.saturating_mul(4).saturating_add(d as usize))
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Gauge `Φ` of a family and the critical gauge `M = Φ/φ` is measured against.
fn gauges(family: CantorFamily, kind: CounterexampleKind) -> (MeasureFunction, MeasureFunction) {
    let phi = match family {
        CantorFamily::Gauge { gauge } => gauge,
        CantorFamily::Beta { beta } => MeasureFunction::LogPower { beta },
    };
    let critical = match kind {
        CounterexampleKind::Thm6 => MeasureFunction::Phi,
        CounterexampleKind::Thm7 => MeasureFunction::Psi,
    };
    (phi, critical)
}

/// Ratios of the counterexample at `r_k` for each requested `k`, at the
/// Cantor point with address `a_digits`.
pub fn thm67_ratio_probe(
    setup: &ProbeSetup,
    a_digits: &[u8],
    ks: &[usize],
    opts: ProbeOptions,
) -> Result<Vec<ProbeRung>> {
    if !(opts.cells_per_radius >= 4.0) {
        return Err(Error::invalid("probe grids need at least 4 cells per radius"));
    }
    if a_digits.iter().any(|&d| d as usize >= CHILD_OFFSETS.len()) {
        return Err(Error::invalid("address digits must lie in 0..4"));
    }
    let factor = setup.kind.factor();
    let depth = setup
        .spec
        .levels
        .iter()
        .map(|&(n, big_n)| factor * big_n + n)
        .max()
        .unwrap_or(0)
        .max(a_digits.len());
    let seq = sigma_sequence(setup.spec.family, depth)?;
    ks.iter().map(|&k| probe_one(setup, &seq, a_digits, k, opts)).collect()
}

fn probe_one(
    setup: &ProbeSetup,
    seq: &SigmaSequence,
    a_digits: &[u8],
    k: usize,
    opts: ProbeOptions,
) -> Result<ProbeRung> {
    let factor = setup.kind.factor();
    let mode = setup.kind.mode();
    let Some(&(_, big_n)) = setup.spec.levels.iter().find(|&&(n, _)| n == k) else {
        return Err(Error::invalid(format!("k = {k} is not among the built levels")));
    };
    let g = factor * big_n;
    let block_gen = g + k;
    if a_digits.len() < block_gen {
        return Err(Error::invalid(format!(
            "the point address needs at least {block_gen} digits for k = {k}"
        )));
    }
    let ell = seq.log_inv(big_n);
    let r_loc = std::f64::consts::SQRT_2;
    let rho = std::f64::consts::SQRT_2 * seq.ratio(block_gen, big_n);
    let len = a_digits.len();
    let half_a = 0.5 * seq.ratio(len, big_n);
    let a = {
        let c = offset_units(seq, a_digits, big_n, big_n);
        [c[0] + half_a, c[1] + half_a]
    };

    for &(n, big_n_n) in &setup.spec.levels {
        if n < k {
            certify_level(seq, a_digits, n, factor * big_n_n, big_n)?;
        }
    }

    let blocks = window_blocks(seq, a_digits, big_n, g, block_gen, a, r_loc, rho)?;
    for (digits, p) in &blocks {
        if norm(sub(*p, a)) < rho {
            return Err(Error::InsideExceptionalBall {
                level: k,
                ball: square_index(digits),
            });
        }
    }
    let centres: Vec<[f64; 2]> = blocks.iter().map(|(_, p)| *p).collect();
    let pointwise = |z: [f64; 2], q: f64| match mode {
        DiffMode::Capacity => q / norm(sub(z, a)),
        _ => q,
    };

    // Uniform grid over the window.
    let h = (r_loc / opts.cells_per_radius).min(rho / 8.0);
    let mut samples: Vec<(Vec<i64>, f64)> = Vec::new();
    for p in &centres {
        let lo = [((p[0] - rho - a[0]) / h).floor() as i64 - 1, ((p[1] - rho - a[1]) / h).floor() as i64 - 1];
        let hi = [((p[0] + rho - a[0]) / h).ceil() as i64 + 1, ((p[1] + rho - a[1]) / h).ceil() as i64 + 1];
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                let z = [a[0] + h * (i as f64 + 0.5), a[1] + h * (j as f64 + 0.5)];
                let dp = norm(sub(z, *p));
                if dp < rho && norm(sub(z, a)) < r_loc {
                    samples.push((vec![i, j], pointwise(z, (rho / dp).ln())));
                }
            }
        }
    }
    samples.sort_by(|x, y| x.0.cmp(&y.0));
    samples.dedup_by(|x, y| x.0 == y.0);
    let (grid_sup, grid_t) = if samples.is_empty() {
        (0.0, 0.0)
    } else {
        let (cells, values): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
        let grid = SampleGrid::new(CellCover::new(2, h, a.to_vec(), cells)?, values)?;
        let w = weak_cap_norm_scaled(&grid, ell, opts.solver)?;
        (w.value, w.t_star)
    };

    let (zoom_sup, zoom_t) = zoomed_sup(&centres, a, r_loc, rho, ell, mode, opts)?;

    let ball = CellCover::ball(&a, r_loc, r_loc / opts.cells_per_radius.max(32.0))?;
    let ball_capacity = cover_capacity_scaled(&ball, ell, opts.solver)?.into_converged()?.capacity;

    let (sup, t_star) = if zoom_sup > grid_sup { (zoom_sup, zoom_t) } else { (grid_sup, grid_t) };
    let ln_w = -2.0 * (k as f64).ln() - g as f64 * 4f64.ln();
    let mut ln_ratio = ln_w + sup.ln() - ball_capacity.ln() + ell;
    if mode == DiffMode::WeakCapacity {
        ln_ratio -= r_loc.ln();
    }

    let (phi, critical) = gauges(setup.spec.family, setup.kind);
    let ln_m = |n: usize| phi.ln_eval_at_log_scale(seq.log_inv(n)) - critical.ln_eval_at_log_scale(seq.log_inv(n));
    let ln_predicted = match setup.kind {
        CounterexampleKind::Thm6 => ln_m(big_n) - 2.0 * (k as f64).ln(),
        CounterexampleKind::Thm7 => {
            let min_m = (big_n..=block_gen).map(ln_m).fold(f64::INFINITY, f64::min);
            let sum: f64 = (1..=big_n).map(|l| seq.log_inv(big_n + l - 1).powi(-2)).sum();
            min_m + ell.ln() + sum.ln() - 2.0 * (k as f64).ln()
        }
    };

    Ok(ProbeRung {
        k,
        big_n,
        mode,
        log_inv_radius: ell - r_loc.ln(),
        blocks_in_window: centres.len(),
        grid_sup,
        zoom_sup,
        t_star,
        ball_capacity,
        ln_ratio,
        ratio: ln_ratio.exp(),
        ln_predicted,
        predicted: ln_predicted.exp(),
    })
}

/// Checks that no level-`n` exceptional disc meets the window `B(a, √2 σ_N)`.
fn certify_level(seq: &SigmaSequence, a_digits: &[u8], n: usize, g_n: usize, big_n: usize) -> Result<()> {
    let block_gen = g_n + n;
    if a_digits.len() < block_gen {
        return Err(Error::invalid(format!(
            "the point address needs at least {block_gen} digits to clear level {n}"
        )));
    }
    let s2 = std::f64::consts::SQRT_2;
    let Some(pos) = a_digits[g_n..block_gen].iter().position(|&d| d != 0) else {
        return Err(Error::InsideExceptionalBall {
            level: n,
            ball: square_index(&a_digits[..g_n]),
        });
    };
    // Block of a's own generation-g_n square, in units of the last common square.
    let j = g_n + pos + 1;
    let p = 0.5 * seq.ratio(block_gen, j - 1);
    let c = offset_units(seq, a_digits, j - 1, j - 1);
    let half = 0.5 * seq.ratio(a_digits.len(), j - 1);
    let dist = norm([c[0] + half - p, c[1] + half - p]);
    let reach = s2 * (seq.ratio(block_gen, j - 1) + seq.ratio(big_n, j - 1));
    let clear_own = dist >= reach;
    // Blocks of other generation-g_n squares lie beyond the sibling gap.
    let clear_others = g_n == 0 || {
        let gap = 1.0 - 2.0 * seq.lambda(g_n);
        gap >= s2 * (seq.ratio(block_gen, g_n - 1) + seq.ratio(big_n, g_n - 1))
    };
    if clear_own && clear_others {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "the window B(a, √2 σ_{big_n}) meets a level-{n} exceptional disc; choose a larger N"
        )))
    }
}

/// Level-`k` block centres (frame units) whose discs meet the window, with
/// the addresses of their generation-`g` squares.
#[allow(clippy::too_many_arguments)]
fn window_blocks(
    seq: &SigmaSequence,
    a_digits: &[u8],
    big_n: usize,
    g: usize,
    block_gen: usize,
    a: [f64; 2],
    r_loc: f64,
    rho: f64,
) -> Result<Vec<(Vec<u8>, [f64; 2])>> {
    let reach = r_loc + rho;
    // Ancestor generation whose other squares cannot reach the window.
    let mut anc = big_n;
    while anc > 0 && seq.ratio(anc - 1, big_n) - 2.0 * seq.ratio(anc, big_n) < reach {
        anc -= 1;
    }
    let start = offset_units(seq, &a_digits[..big_n], anc, big_n);
    let mut stack = vec![(a_digits[..anc].to_vec(), [-start[0], -start[1]])];
    let half_block = 0.5 * seq.ratio(block_gen, big_n);
    let mut out = Vec::new();
    while let Some((digits, corner)) = stack.pop() {
        let m = digits.len();
        let side = seq.ratio(m, big_n);
        let dx = a[0] - a[0].clamp(corner[0], corner[0] + side);
        let dy = a[1] - a[1].clamp(corner[1], corner[1] + side);
        if dx.hypot(dy) >= reach {
            continue;
        }
        if m == g {
            let p = [corner[0] + half_block, corner[1] + half_block];
            if norm(sub(p, a)) < reach {
                out.push((digits, p));
                if out.len() > ATOM_BUDGET / 64 {
                    return Err(Error::BudgetExceeded {
                        what: format!("blocks of generation {g} inside the probe window"),
                        needed: out.len() as f64,
                        budget: ATOM_BUDGET / 64,
                    });
                }
            }
            continue;
        }
        let step = side - seq.ratio(m + 1, big_n);
        for (d, o) in CHILD_OFFSETS.iter().enumerate().rev() {
            let mut child = digits.clone();
            child.push(d as u8);
            stack.push((child, [corner[0] + o[0] * step, corner[1] + o[1] * step]));
        }
    }
    Ok(out)
}

/// `sup_t t Cap({Q > t})` over super-level sets small enough to sit well
/// inside the window and apart from each other. Each component is covered
/// in its own frame; components interact through their centre distance.
fn zoomed_sup(
    centres: &[[f64; 2]],
    a: [f64; 2],
    r_loc: f64,
    rho: f64,
    ell: f64,
    mode: DiffMode,
    opts: ProbeOptions,
) -> Result<(f64, f64)> {
    let inside: Vec<[f64; 2]> = centres.iter().copied().filter(|p| norm(sub(*p, a)) < r_loc).collect();
    if inside.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut sep = f64::INFINITY;
    for i in 0..inside.len() {
        for j in 0..i {
            sep = sep.min(norm(sub(inside[i], inside[j])));
        }
    }
    // Growth rate of ln(1/radius) in t, and the largest admissible radius.
    let rate: Vec<f64> = inside
        .iter()
        .map(|p| if mode == DiffMode::Capacity { norm(sub(*p, a)) } else { 1.0 })
        .collect();
    let margin: Vec<f64> = inside.iter().map(|p| 0.25 * sep.min(r_loc - norm(sub(*p, a)))).collect();
    const SLACK: f64 = 1.5;
    let t0 = (0..inside.len())
        .map(|i| (SLACK * rho / margin[i]).ln().max(0.0) / rate[i])
        .fold(0.0, f64::max)
        .max(1e-3);

    let unit = CellCover::ball(&[0.0, 0.0], 1.0, 1.0 / opts.cells_per_radius)?;
    let unit_centres = unit.centres();
    let hu = 1.0 / opts.cells_per_radius;
    let mut best = (0.0, 0.0);
    for step in 0..opts.zoom_doublings {
        let t = t0 * 2f64.powi(step as i32);
        // Per component: ln(1/b) and the kept unit-disc cells (boundary only).
        let mut parts: Vec<(f64, Vec<f64>)> = Vec::with_capacity(inside.len());
        for (i, p) in inside.iter().enumerate() {
            let ln_inv_b = (1.0 / rho).ln() + t * rate[i] - SLACK.ln();
            let b = (-ln_inv_b).exp();
            let keep: Vec<usize> = unit_centres
                .chunks_exact(2)
                .enumerate()
                .filter(|(_, u)| {
                    let q = rho.ln() + ln_inv_b - norm([u[0], u[1]]).ln();
                    let z = [p[0] + b * u[0], p[1] + b * u[1]];
                    let v = if mode == DiffMode::Capacity { q / norm(sub(z, a)) } else { q };
                    v > t
                })
                .map(|(c, _)| c)
                .collect();
            if keep.is_empty() {
                continue;
            }
            let sub_cover = unit.subset(keep);
            let boundary = sub_cover.subset(sub_cover.boundary_cells());
            parts.push((ln_inv_b, boundary.centres()));
        }
        if parts.is_empty() {
            continue;
        }
        let n: usize = parts.iter().map(|(_, c)| c.len() / 2).sum();
        let mut entries = vec![0.0; n * n];
        let mut offsets = Vec::with_capacity(parts.len());
        let mut acc = 0;
        for (_, c) in &parts {
            offsets.push(acc);
            acc += c.len() / 2;
        }
        for (pi, (ln_inv_b, ci)) in parts.iter().enumerate() {
            let oi = offsets[pi];
            let ni = ci.len() / 2;
            let base = ell + ln_inv_b;
            for x in 0..ni {
                for y in 0..ni {
                    entries[(oi + x) * n + oi + y] = if x == y {
                        base + (1.0 / (C_SELF * hu)).ln()
                    } else {
                        let d = (ci[2 * x] - ci[2 * y]).hypot(ci[2 * x + 1] - ci[2 * y + 1]);
                        base - d.ln()
                    };
                }
            }
            for (pj, (_, cj)) in parts.iter().enumerate() {
                if pj == pi {
                    continue;
                }
                let v = ell - norm(sub(inside[pi], inside[pj])).ln();
                let oj = offsets[pj];
                for x in 0..ni {
                    for y in 0..cj.len() / 2 {
                        entries[(oi + x) * n + oj + y] = v;
                    }
                }
            }
        }
        let m = EnergyMatrix::from_entries(n, entries, KernelSpec::Log);
        let cap = equilibrium_from_matrix(&m, opts.solver).capacity;
        if t * cap > best.0 {
            best = (t * cap, t);
        }
    }
    Ok(best)
}
