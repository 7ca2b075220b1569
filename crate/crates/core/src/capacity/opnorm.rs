use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::SignedAtomicMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpNormOptions {
    /// Relative change of the Rayleigh quotient that stops the iteration.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Quadratic-cost guard on the atom count.
    pub max_atoms: usize,
}

impl Default for OpNormOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 2000,
            seed: 0x5eed,
            max_atoms: 1 << 15,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OpNormEstimate {
    pub norm: f64,
    pub iterations: usize,
    /// Relative change of the last Rayleigh quotient.
    pub residual: f64,
    pub converged: bool,
}

/// Largest singular value of `f ↦ Σ_{|x−y|>ε} f(y) (x−y)/|x−y|^d dμ(y)` on
/// `L²(μ)`, by power iteration on `T*T`.
///
/// The kernel is antisymmetric, so `T*T = −Σ_c T_c T_c` for the coordinate
/// operators `T_c`.
pub fn operator_norm_estimate(mu: &SignedAtomicMeasure, eps: f64, opts: OpNormOptions) -> Result<OpNormEstimate> {
    if !mu.is_nonnegative() {
        return Err(Error::invalid("operator norms need a nonnegative measure"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("truncation level must be positive"));
    }
    if !(2..=3).contains(&mu.dim()) {
        return Err(Error::invalid("operator norms are estimated in dimension 2 or 3"));
    }
    let n = mu.len();
    if n > opts.max_atoms {
        return Err(Error::TooManyAtoms {
            count: n,
            cap: opts.max_atoms,
        });
    }
    let op = Truncated {
        dim: mu.dim(),
        coords: mu.coords(),
        weights: mu.weights(),
        eps2: eps * eps,
    };
    let w = mu.weights();
    let norm_w = |v: &[f64]| v.iter().zip(w).map(|(x, m)| m * x * x).sum::<f64>().sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm_w(&v);
    if nv == 0.0 {
        return Ok(OpNormEstimate {
            norm: 0.0,
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    v.iter_mut().for_each(|x| *x /= nv);

    let mut lambda = 0.0f64;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let u = op.normal(&v);
        let next: f64 = u.iter().zip(&v).zip(w).map(|((a, b), m)| m * a * b).sum();
        let nu = norm_w(&u);
        if nu == 0.0 {
            return Ok(OpNormEstimate {
                norm: 0.0,
                iterations: it,
                residual: 0.0,
                converged: true,
            });
        }
        residual = (next - lambda).abs() / next.abs();
        lambda = next;
        v = u.into_iter().map(|x| x / nu).collect();
        if residual < opts.tol {
            return Ok(OpNormEstimate {
                norm: lambda.max(0.0).sqrt(),
                iterations: it,
                residual,
                converged: true,
            });
        }
    }
    Ok(OpNormEstimate {
        norm: lambda.max(0.0).sqrt(),
        iterations: opts.max_iter,
        residual,
        converged: false,
    })
}

struct Truncated<'a> {
    dim: usize,
    coords: &'a [f64],
    weights: &'a [f64],
    eps2: f64,
}

impl Truncated<'_> {
    /// `T*T v = −Σ_c T_c T_c v`.
    fn normal(&self, v: &[f64]) -> Vec<f64> {
        match self.dim {
            2 => self.normal_fixed::<2>(v),
            3 => self.normal_fixed::<3>(v),
            _ => unreachable!("kernels are defined in dimension 2 and 3"),
        }
    }

    fn normal_fixed<const D: usize>(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let w = self.weights;
        let xs: [Vec<f64>; D] = std::array::from_fn(|c| (0..n).map(|i| self.coords[i * D + c]).collect());
        let eps2 = self.eps2;
        let kernel = |r2: f64| {
            let inv = if D == 2 { 1.0 / r2 } else { 1.0 / (r2 * r2.sqrt()) };
            if r2 > eps2 {
                inv
            } else {
                0.0
            }
        };

        // u[c][i] = (T_c v)_i, weighted by w for the second pass.
        let wv: Vec<f64> = w.iter().zip(v).map(|(a, b)| a * b).collect();
        let mut u: [Vec<f64>; D] = std::array::from_fn(|_| vec![0.0; n]);
        for i in 0..n {
            let xi: [f64; D] = std::array::from_fn(|c| xs[c][i]);
            let mut acc = [0.0; D];
            for j in 0..i {
                let diff: [f64; D] = std::array::from_fn(|c| xi[c] - xs[c][j]);
                let s = kernel(diff.iter().map(|d| d * d).sum());
                for c in 0..D {
                    let k = diff[c] * s;
                    acc[c] += k * wv[j];
                    u[c][j] -= k * wv[i];
                }
            }
            for c in 0..D {
                u[c][i] += acc[c];
            }
        }
        for uc in u.iter_mut() {
            uc.iter_mut().zip(w).for_each(|(x, m)| *x *= m);
        }

        let mut out = vec![0.0; n];
        for i in 0..n {
            let xi: [f64; D] = std::array::from_fn(|c| xs[c][i]);
            let ui: [f64; D] = std::array::from_fn(|c| u[c][i]);
            let mut acc = 0.0;
            for j in 0..i {
                let diff: [f64; D] = std::array::from_fn(|c| xi[c] - xs[c][j]);
                let s = kernel(diff.iter().map(|d| d * d).sum());
                let mut to_i = 0.0;
                let mut to_j = 0.0;
                for c in 0..D {
                    to_i += diff[c] * u[c][j];
                    to_j += diff[c] * ui[c];
                }
                acc += s * to_i;
                out[j] -= s * to_j;
            }
            out[i] += acc;
        }
        out.iter_mut().for_each(|x| *x = -*x);
        out
    }
}
