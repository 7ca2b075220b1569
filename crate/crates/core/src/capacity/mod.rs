//! Discrete energies, equilibrium measures and capacities.
//!
//! Kernels are normalised as `1/|x|^{d-2}` and `log(1/|z|)`, so a ball of
//! radius `r` has capacity `r^{d-2}` (`d >= 3`) or `1/log(1/r)` in the plane.

mod cover;
mod lemma8;
mod matrix;
mod opnorm;
mod solver;

use serde::Serialize;

pub use cover::{
    capacity_of_cover, cover_capacity_scaled, cover_capacity_with, weak_cap_norm, weak_cap_norm_scaled, CellCover,
    SampleGrid, WeakCapNorm, WEAK_CAP_BRACKET, WEAK_CAP_LADDER_RATIO, WEAK_CAP_REFINE,
};
pub use lemma8::{superadditivity_check, Disc, SuperadditivityReport};
pub use matrix::{k_self, EnergyMatrix, C_SELF};
pub use opnorm::{operator_norm_estimate, OpNormEstimate, OpNormOptions};
pub use solver::{SolveOutcome, SolverOptions};

use crate::error::{Error, Result};
use crate::measures::{dist2, SignedAtomicMeasure};
use crate::potentials::KernelSpec;
use crate::summation::KahanSum;

/// Radius of the disc inside which the logarithmic kernel is positive.
pub const LOG_DOMAIN_RADIUS: f64 = 0.5;

/// Rejects planar points outside the closed disc `|x − centre| <= 1/2`.
pub(crate) fn check_log_domain(dim: usize, coords: &[f64], centre: &[f64]) -> Result<()> {
    for (index, x) in coords.chunks_exact(dim).enumerate() {
        let norm = dist2(x, centre).sqrt();
        if norm > LOG_DOMAIN_RADIUS {
            return Err(Error::LogDomainViolation { index, norm });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Energy {
    pub value: f64,
    /// Set when the measure has zero resolution and the diagonal was dropped.
    pub off_diagonal_only: bool,
}

/// `Σ_{i≠j} w_i w_j k(x_i − x_j) + Σ_i w_i² k_self(resolution)`.
pub fn energy(mu: &SignedAtomicMeasure, k: KernelSpec) -> Result<Energy> {
    k.check_dim(mu.dim())?;
    if k == KernelSpec::Log {
        check_log_domain(2, mu.coords(), &[0.0, 0.0])?;
    }
    let n = mu.len();
    let mut acc = KahanSum::new();
    for i in 0..n {
        let xi = mu.location(i);
        let wi = mu.weight(i);
        for j in 0..i {
            acc.add(2.0 * wi * mu.weight(j) * k.at_dist2(dist2(xi, mu.location(j))));
        }
    }
    let off_diagonal_only = mu.resolution() == 0.0;
    if !off_diagonal_only {
        let diag = k_self(k, mu.resolution());
        for &w in mu.weights() {
            acc.add(w * w * diag);
        }
    }
    Ok(Energy {
        value: acc.value(),
        off_diagonal_only,
    })
}

/// Support points of a candidate equilibrium problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub resolution: f64,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>, resolution: f64) -> Result<Self> {
        if dim < 2 || coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid("a point cloud needs at least one point of dimension >= 2"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::invalid("point clouds need a positive resolution"));
        }
        Ok(Self {
            dim,
            coords,
            resolution,
        })
    }

    pub fn from_measure(mu: &SignedAtomicMeasure) -> Result<Self> {
        Self::new(mu.dim(), mu.coords().to_vec(), mu.resolution())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumResult {
    pub weights: Vec<f64>,
    pub energy: f64,
    pub capacity: f64,
    pub initial_energy: f64,
    pub iterations: usize,
    /// Relative duality gap at exit.
    pub residual: f64,
    pub converged: bool,
}

impl EquilibriumResult {
    fn from_outcome(out: SolveOutcome) -> Self {
        Self {
            capacity: 1.0 / out.energy,
            weights: out.weights,
            energy: out.energy,
            initial_energy: out.initial_energy,
            iterations: out.iterations,
            residual: out.residual,
            converged: out.converged,
        }
    }

    /// The result itself if the solver converged, otherwise `NonConvergence`.
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }

    /// The equilibrium weights as a measure on the cloud.
    pub fn as_measure(&self, cloud: &PointCloud) -> Result<SignedAtomicMeasure> {
        SignedAtomicMeasure::new(cloud.dim, cloud.coords.clone(), self.weights.clone(), cloud.resolution)
    }
}

/// Minimises the discrete energy over probability weights on the cloud.
///
/// A run that hits the iteration cap returns its best iterate with
/// `converged == false`.
pub fn equilibrium_solve(cloud: &PointCloud, k: KernelSpec, opts: SolverOptions) -> Result<EquilibriumResult> {
    if k == KernelSpec::Log {
        check_log_domain(2, &cloud.coords, &[0.0, 0.0])?;
    }
    let m = EnergyMatrix::assemble(cloud.dim, &cloud.coords, cloud.resolution, k)?;
    Ok(EquilibriumResult::from_outcome(solver::solve(&m, opts)))
}

/// Equilibrium problem on a prebuilt matrix.
pub fn equilibrium_from_matrix(m: &EnergyMatrix, opts: SolverOptions) -> EquilibriumResult {
    EquilibriumResult::from_outcome(solver::solve(m, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pair_energy_and_homogeneity() {
        let k = KernelSpec::Riesz { dim: 3 };
        let mu = SignedAtomicMeasure::new(3, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0], vec![1.0, 1.0], 0.0).unwrap();
        let e = energy(&mu, k).unwrap();
        assert_eq!(e.value, 2.0);
        assert!(e.off_diagonal_only);
        let half = mu.dilated(0.5).unwrap().with_resolution(0.0).unwrap();
        assert_eq!(energy(&half, k).unwrap().value, 4.0);
        let e = energy(&mu.clone().with_resolution(0.5).unwrap(), k).unwrap();
        assert_eq!(e.value, 2.0 + 2.0 * 4.0);
        assert!(!e.off_diagonal_only);
    }

    #[test]
    fn log_domain_is_enforced() {
        let mu = SignedAtomicMeasure::dirac(&[0.6, 0.0], 1.0).unwrap();
        assert!(matches!(
            energy(&mu, KernelSpec::Log),
            Err(Error::LogDomainViolation { index: 0, .. })
        ));
        let cloud = PointCloud::new(2, vec![0.0, 0.0, 0.0, 0.51], 0.01).unwrap();
        assert!(matches!(
            equilibrium_solve(&cloud, KernelSpec::Log, SolverOptions::default()),
            Err(Error::LogDomainViolation { index: 1, .. })
        ));
    }

    #[test]
    fn two_symmetric_cells() {
        let cloud = PointCloud::new(2, vec![-0.1, 0.0, 0.1, 0.0], 0.01).unwrap();
        let res = equilibrium_solve(&cloud, KernelSpec::Log, SolverOptions::default())
            .unwrap()
            .into_converged()
            .unwrap();
        assert_relative_eq!(res.weights[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(res.capacity, 1.0 / res.energy);
    }

    #[test]
    fn single_cell_capacity_is_inverse_self_energy() {
        let cloud = PointCloud::new(3, vec![0.0; 3], 0.1).unwrap();
        let res = equilibrium_solve(&cloud, KernelSpec::Riesz { dim: 3 }, SolverOptions::default()).unwrap();
        assert_relative_eq!(res.capacity, 0.05);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let coords: Vec<f64> = (0..30).flat_map(|i| [0.01 * i as f64, 0.0]).collect();
        let cloud = PointCloud::new(2, coords, 0.01).unwrap();
        let res = equilibrium_solve(&cloud, KernelSpec::Log, SolverOptions { tol: 1e-15, max_iter: Some(2) }).unwrap();
        assert!(!res.converged);
        assert!(matches!(res.into_converged(), Err(Error::NonConvergence { iterations: 2, .. })));
    }
}
