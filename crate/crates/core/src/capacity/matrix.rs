use crate::error::{Error, Result};
use crate::measures::dist2;
use crate::potentials::KernelSpec;

/// Distance factor of the self-energy model: `k_self(h) = k(C_SELF · h)`.
pub const C_SELF: f64 = 0.5;

/// Diagonal entry used for a cell of diameter `h`.
pub fn k_self(k: KernelSpec, h: f64) -> f64 {
    k.at_distance(C_SELF * h)
}

/// Dense symmetric interaction matrix of a point cloud, row-major.
#[derive(Debug, Clone)]
pub struct EnergyMatrix {
    n: usize,
    entries: Vec<f64>,
    kernel: KernelSpec,
}

impl EnergyMatrix {
    /// Off-diagonal `k(x_i − x_j)`, diagonal `k_self(resolution)`.
    pub fn assemble(dim: usize, coords: &[f64], resolution: f64, kernel: KernelSpec) -> Result<Self> {
        kernel.check_dim(dim)?;
        if !(resolution > 0.0) {
            return Err(Error::invalid("energy matrices need a positive resolution"));
        }
        let n = coords.len() / dim;
        let diag = k_self(kernel, resolution);
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            let xi = &coords[i * dim..(i + 1) * dim];
            entries[i * n + i] = diag;
            for j in 0..i {
                let r2 = dist2(xi, &coords[j * dim..(j + 1) * dim]);
                if r2 == 0.0 {
                    return Err(Error::invalid(format!("points {j} and {i} coincide")));
                }
                let v = kernel.at_dist2(r2);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Ok(Self { n, entries, kernel })
    }

    /// Row-major symmetric entries supplied by the caller.
    pub(crate) fn from_entries(n: usize, entries: Vec<f64>, kernel: KernelSpec) -> Self {
        debug_assert_eq!(entries.len(), n * n);
        Self { n, entries, kernel }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Adds `c` to every entry, the energy change under a rescaling of the
    /// logarithmic kernel for probability weights.
    pub fn add_constant(&mut self, c: f64) {
        self.entries.iter_mut().for_each(|e| *e += c);
    }

    /// `K w`.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(w).map(|(k, x)| k * x).sum())
            .collect()
    }

    /// `wᵀ K w`.
    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        self.apply(w).iter().zip(w).map(|(p, x)| p * x).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_with_self_diagonal() {
        let coords = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.0];
        let m = EnergyMatrix::assemble(3, &coords, 0.1, KernelSpec::Riesz { dim: 3 }).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(2, 1), m.get(1, 2));
        assert_eq!(m.get(1, 1), 1.0 / 0.05);
        assert_eq!(m.quadratic_form(&[1.0, 0.0, 0.0]), 20.0);
    }

    #[test]
    fn rejects_coincident_points() {
        let coords = [0.1, 0.1, 0.1, 0.1];
        assert!(EnergyMatrix::assemble(2, &coords, 0.01, KernelSpec::Log).is_err());
    }
}
