//! Away-step Frank–Wolfe for `min wᵀKw` over the probability simplex.

use serde::{Deserialize, Serialize};

use super::matrix::EnergyMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Target for the relative duality gap `2(E − min_i (Kw)_i) / E`.
    pub tol: f64,
    /// Iteration cap; `None` means `50 · N`.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, max_iter: None }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub weights: Vec<f64>,
    pub energy: f64,
    /// Energy of the uniform starting point.
    pub initial_energy: f64,
    pub iterations: usize,
    /// Final relative duality gap.
    pub residual: f64,
    pub converged: bool,
}

pub fn solve(k: &EnergyMatrix, opts: SolverOptions) -> SolveOutcome {
    let n = k.len();
    let max_iter = opts.max_iter.unwrap_or(50 * n.max(1));
    let mut w = vec![1.0 / n as f64; n];
    let mut p = k.apply(&w);
    let mut scan = Scan::of(&w, &p);
    let initial_energy = scan.energy;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations <= max_iter {
        let Scan { energy, s, ps, v, pv } = scan;
        residual = 2.0 * (energy - ps) / energy.abs();
        if residual < opts.tol {
            converged = true;
            break;
        }
        if iterations == max_iter {
            break;
        }
        iterations += 1;

        // Each branch updates w and p = Kw in one pass that also rescans them.
        let fw_gap = energy - ps;
        let away_gap = pv - energy;
        if fw_gap >= away_gap {
            // w ← w + γ(e_s − w)
            let slope = ps - energy;
            let curv = k.get(s, s) - 2.0 * ps + energy;
            let gamma = if curv > 0.0 { (-slope / curv).clamp(0.0, 1.0) } else { 1.0 };
            if gamma == 0.0 {
                break;
            }
            let ks = k.row(s);
            let mut next = Scan::start();
            for i in 0..n {
                let mut wi = w[i] * (1.0 - gamma);
                if i == s {
                    wi += gamma;
                }
                w[i] = wi;
                p[i] = (1.0 - gamma) * p[i] + gamma * ks[i];
                next.push(i, wi, p[i]);
            }
            scan = next;
        } else {
            // w ← w + γ(w − e_v)
            let wv = w[v];
            let gamma_max = wv / (1.0 - wv);
            let slope = energy - pv;
            let curv = energy - 2.0 * pv + k.get(v, v);
            let gamma = if curv > 0.0 {
                (-slope / curv).clamp(0.0, gamma_max)
            } else {
                gamma_max
            };
            if gamma == 0.0 {
                break;
            }
            let kv = k.row(v);
            let mut next = Scan::start();
            for i in 0..n {
                let mut wi = w[i] * (1.0 + gamma);
                if i == v {
                    wi = if gamma == gamma_max { 0.0 } else { wi - gamma };
                }
                w[i] = wi;
                p[i] = (1.0 + gamma) * p[i] - gamma * kv[i];
                next.push(i, wi, p[i]);
            }
            scan = next;
        }
        if iterations % 256 == 0 {
            renormalise(&mut w);
            p = k.apply(&w);
            scan = Scan::of(&w, &p);
        }
    }
    renormalise(&mut w);
    let energy = k.quadratic_form(&w);
    SolveOutcome {
        weights: w,
        energy,
        initial_energy,
        iterations,
        residual,
        converged,
    }
}

/// Energy `w·p`, the smallest potential and the largest potential on the
/// support.
#[derive(Clone, Copy)]
struct Scan {
    energy: f64,
    s: usize,
    ps: f64,
    v: usize,
    pv: f64,
}

impl Scan {
    fn start() -> Self {
        Self {
            energy: 0.0,
            s: 0,
            ps: f64::INFINITY,
            v: usize::MAX,
            pv: f64::NEG_INFINITY,
        }
    }

    #[inline]
    fn push(&mut self, i: usize, wi: f64, pi: f64) {
        self.energy += wi * pi;
        if pi < self.ps {
            self.s = i;
            self.ps = pi;
        }
        if wi > 0.0 && pi > self.pv {
            self.v = i;
            self.pv = pi;
        }
    }

    fn of(w: &[f64], p: &[f64]) -> Self {
        let mut scan = Self::start();
        for (i, (&wi, &pi)) in w.iter().zip(p).enumerate() {
            scan.push(i, wi, pi);
        }
        scan
    }
}

fn renormalise(w: &mut [f64]) {
    for x in w.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = crate::summation::sum(w.iter().copied());
    for x in w.iter_mut() {
        *x /= total;
    }
}
