use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::cantor::{corner_of, sigma_sequence, square_corners, CantorFamily, SigmaSequence, CHILD_OFFSETS};
use super::check_budget;
use crate::error::{Error, Result};
use crate::measures::SignedAtomicMeasure;

pub const MIN_CIRCLE_POINTS: usize = 16;

/// `max(64, ⌈2π / arc_tol⌉)`.
pub fn default_circle_points(arc_tol: f64) -> usize {
    let needed = if arc_tol > 0.0 { (2.0 * PI / arc_tol).ceil() } else { 0.0 };
    if needed.is_finite() {
        (needed as usize).max(64)
    } else {
        64
    }
}

/// `δ_p` minus the uniform probability on the circle `|z − p| = ρ`,
/// discretised by `m` equally spaced atoms. Its logarithmic potential is
/// `log(ρ/|z − p|)` inside the disc and vanishes outside, up to an error of
/// order `(ρ/|z − p|)^m` there.
pub fn block_measure(p: [f64; 2], rho: f64, m: usize) -> Result<SignedAtomicMeasure> {
    check_block(rho, m)?;
    let mut coords = Vec::with_capacity(2 * (m + 1));
    let mut weights = Vec::with_capacity(m + 1);
    push_block(&mut coords, &mut weights, p, rho, m, 1.0);
    SignedAtomicMeasure::new(2, coords, weights, 2.0 * PI * rho / m as f64)
}

fn check_block(rho: f64, m: usize) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid("block radius must be positive"));
    }
    if m < MIN_CIRCLE_POINTS {
        return Err(Error::invalid(format!("blocks need at least {MIN_CIRCLE_POINTS} circle points")));
    }
    Ok(())
}

pub(crate) fn push_block(coords: &mut Vec<f64>, weights: &mut Vec<f64>, p: [f64; 2], rho: f64, m: usize, w: f64) {
    coords.extend(p);
    weights.push(w);
    let wc = -w / m as f64;
    for i in 0..m {
        let t = 2.0 * PI * i as f64 / m as f64;
        coords.extend([p[0] + rho * t.cos(), p[1] + rho * t.sin()]);
        weights.push(wc);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockOptions {
    pub circle_points: usize,
}

impl Default for BlockOptions {
    fn default() -> Self {
        Self { circle_points: 64 }
    }
}

/// A counterexample construction: Cantor family plus the chosen `(n, N_n)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub family: CantorFamily,
    pub levels: Vec<(usize, usize)>,
}

/// One level `n` of a block construction.
#[derive(Debug, Clone, Serialize)]
pub struct BlockLevel {
    pub n: usize,
    /// `N_n`.
    pub big_n: usize,
    /// Generation of the squares that each receive one block.
    pub parent_generation: usize,
    /// Generation of the square whose centre carries the block.
    pub block_generation: usize,
    /// Weight of each block, `1/(n² 4^{parent_generation})`.
    pub weight: f64,
    /// `√2 σ_{block_generation}`.
    pub radius: f64,
    /// Block centres; the level's exceptional set is the union of the open
    /// discs of radius `radius` around them.
    pub centres: Vec<[f64; 2]>,
}

impl BlockLevel {
    /// Index of the exceptional disc containing `z`, if any.
    pub fn exceptional_ball_containing(&self, z: [f64; 2]) -> Option<usize> {
        let r2 = self.radius * self.radius;
        self.centres
            .iter()
            .position(|p| (z[0] - p[0]).powi(2) + (z[1] - p[1]).powi(2) < r2)
    }
}

#[derive(Debug, Clone)]
pub struct CounterexampleMeasure {
    pub measure: SignedAtomicMeasure,
    pub sigmas: SigmaSequence,
    pub levels: Vec<BlockLevel>,
}

/// Blocks at the centre of the lower-left generation-`(N_n + n)` descendant
/// of every generation-`N_n` square, weight `1/(n² 4^{N_n})`, radius
/// `√2 σ_{N_n+n}`.
pub fn thm6_measure(spec: &BlockSpec, opts: BlockOptions) -> Result<CounterexampleMeasure> {
    build_blocks(spec, opts, 1)
}

/// As [`thm6_measure`] with parent generation `2N_n`: `4^{2N_n}` blocks of
/// weight `1/(n² 4^{2N_n})` centred on generation-`(2N_n + n)` squares.
pub fn thm7_measure(spec: &BlockSpec, opts: BlockOptions) -> Result<CounterexampleMeasure> {
    build_blocks(spec, opts, 2)
}

fn build_blocks(spec: &BlockSpec, opts: BlockOptions, factor: usize) -> Result<CounterexampleMeasure> {
    let m = opts.circle_points;
    if spec.levels.is_empty() {
        return Err(Error::invalid("at least one level is required"));
    }
    let mut total = 0.0;
    for &(n, big_n) in &spec.levels {
        if n == 0 {
            return Err(Error::invalid("levels start at n = 1"));
        }
        let g = factor * big_n;
        let blocks = 4f64.powi(g as i32);
        let name = if factor == 1 { format!("4^N_{n}") } else { format!("4^(2N_{n})") };
        check_budget(
            format!("level {n}: {name} = 4^{g} blocks of {} atoms", m + 1),
            blocks * (m + 1) as f64,
        )?;
        total += blocks * (m + 1) as f64;
    }
    check_budget("all block levels", total)?;

    let depth = spec.levels.iter().map(|&(n, big_n)| factor * big_n + n).max().unwrap_or(0);
    let sigmas = sigma_sequence(spec.family, depth)?;
    let mut coords = Vec::with_capacity(2 * total as usize);
    let mut weights = Vec::with_capacity(total as usize);
    let mut levels = Vec::with_capacity(spec.levels.len());
    let mut resolution = f64::INFINITY;
    for &(n, big_n) in &spec.levels {
        let g = factor * big_n;
        let side = sigmas.sigma(g + n);
        let radius = 2f64.sqrt() * side;
        check_block(radius, m)?;
        let weight = 1.0 / ((n * n) as f64 * 4f64.powi(g as i32));
        let centres: Vec<[f64; 2]> = square_corners(&sigmas, g)?
            .into_iter()
            .map(|c| [c[0] + 0.5 * side, c[1] + 0.5 * side])
            .collect();
        for &p in &centres {
            push_block(&mut coords, &mut weights, p, radius, m, weight);
        }
        resolution = resolution.min(2.0 * PI * radius / m as f64);
        levels.push(BlockLevel {
            n,
            big_n,
            parent_generation: g,
            block_generation: g + n,
            weight,
            radius,
            centres,
        });
    }
    let measure = SignedAtomicMeasure::new(2, coords, weights, resolution)?;
    Ok(CounterexampleMeasure {
        measure,
        sigmas,
        levels,
    })
}

/// A square `Q^{N_k + l}` of the capacity lower bound around a point `a`.
#[derive(Debug, Clone, Serialize)]
pub struct ClassifiedSquare {
    pub l: usize,
    pub generation: usize,
    pub digits: Vec<u8>,
    pub corner: [f64; 2],
    pub side: f64,
    /// Number of level-`k` block centres (generation-`2N_k` squares) inside.
    pub block_count: f64,
    /// `2 σ_{N_k + l − 1}`, which bounds `|z − a|` over the square.
    pub distance_bound: f64,
}

/// For `l = 1..=N_k`, the lexicographically first generation-`(N_k + l)`
/// square inside the generation-`(N_k + l − 1)` square of `a` that does not
/// contain `a`. The squares are pairwise disjoint and the one at scale `l`
/// holds `4^{N_k − l}` generation-`2N_k` squares.
pub fn thm7_classification(seq: &SigmaSequence, a_digits: &[u8], big_n: usize) -> Result<Vec<ClassifiedSquare>> {
    if a_digits.len() < 2 * big_n || seq.generations() < 2 * big_n {
        return Err(Error::invalid("the point address and the σ-sequence must reach generation 2N_k"));
    }
    if a_digits.iter().any(|&d| d as usize >= CHILD_OFFSETS.len()) {
        return Err(Error::invalid("address digits must lie in 0..4"));
    }
    let mut out = Vec::with_capacity(big_n);
    for l in 1..=big_n {
        let generation = big_n + l;
        let own = a_digits[generation - 1];
        let sibling = if own == 0 { 1 } else { 0 };
        let mut digits = a_digits[..generation - 1].to_vec();
        digits.push(sibling);
        out.push(ClassifiedSquare {
            l,
            generation,
            corner: corner_of(seq, &digits),
            digits,
            side: seq.sigma(generation),
            block_count: 4f64.powi((big_n - l) as i32),
            distance_bound: 2.0 * seq.sigma(generation - 1),
        });
    }
    Ok(out)
}
