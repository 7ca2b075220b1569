use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::measures::SignedAtomicMeasure;

/// Equal-weight atoms on the sphere `|x − centre| = radius`: equal angles in
/// the plane, a Fibonacci lattice in space. The resolution is the mesh size.
pub fn sphere_measure(centre: &[f64], radius: f64, mass: f64, count: usize) -> Result<SignedAtomicMeasure> {
    if count < 8 {
        return Err(Error::invalid("a sphere measure needs at least 8 atoms"));
    }
    if !(radius > 0.0 && radius.is_finite() && mass.is_finite()) {
        return Err(Error::invalid("sphere radius must be positive and mass finite"));
    }
    let n = count as f64;
    let (coords, resolution): (Vec<f64>, f64) = match centre.len() {
        2 => {
            let coords = (0..count)
                .flat_map(|k| {
                    let t = 2.0 * PI * k as f64 / n;
                    [centre[0] + radius * t.cos(), centre[1] + radius * t.sin()]
                })
                .collect();
            (coords, 2.0 * PI * radius / n)
        }
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            let coords = (0..count)
                .flat_map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / n;
                    let rho = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    [
                        centre[0] + radius * rho * t.cos(),
                        centre[1] + radius * rho * t.sin(),
                        centre[2] + radius * z,
                    ]
                })
                .collect();
            (coords, (4.0 * PI * radius * radius / n).sqrt())
        }
        _ => return Err(Error::invalid("sphere measures are built in dimension 2 or 3")),
    };
    SignedAtomicMeasure::new(centre.len(), coords, vec![mass / n; count], resolution)
}

/// Equal-weight atoms at the centres of the lattice cells (side `h`, anchored
/// at `centre`) that lie in the open ball. The resolution is `h`.
pub fn solid_ball_measure(centre: &[f64], radius: f64, h: f64, mass: f64) -> Result<SignedAtomicMeasure> {
    let d = centre.len();
    if !(2..=3).contains(&d) {
        return Err(Error::invalid("ball measures are built in dimension 2 or 3"));
    }
    if !(radius > 0.0 && h > 0.0 && h < radius && mass.is_finite()) {
        return Err(Error::invalid("ball measure needs 0 < h < radius and finite mass"));
    }
    let m = (radius / h).ceil() as i64;
    let r2 = radius * radius;
    let mut coords = Vec::new();
    let mut idx = vec![-m; d];
    loop {
        let offset: Vec<f64> = idx.iter().map(|&i| h * (i as f64 + 0.5)).collect();
        if offset.iter().map(|x| x * x).sum::<f64>() < r2 {
            coords.extend(offset.iter().zip(centre).map(|(o, c)| c + o));
        }
        let mut axis = 0;
        loop {
            if axis == d {
                let count = coords.len() / d;
                return SignedAtomicMeasure::new(d, coords, vec![mass / count as f64; count], h);
            }
            idx[axis] += 1;
            if idx[axis] < m {
                break;
            }
            idx[axis] = -m;
            axis += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{potential, KernelSpec};
    use approx::assert_relative_eq;

    #[test]
    fn circle_atoms_at_equal_angles() {
        let mu = sphere_measure(&[0.0, 0.0], 1.0, 2.0 * PI, 360).unwrap();
        assert_eq!(mu.len(), 360);
        for k in [0, 1, 90, 359] {
            let t = 2.0 * PI * k as f64 / 360.0;
            let x = mu.location(k);
            assert_relative_eq!(x[0], t.cos());
            assert_relative_eq!(x[1], t.sin());
            assert_relative_eq!(mu.weight(k), 2.0 * PI / 360.0);
        }
        assert_relative_eq!(mu.total_variation(), 2.0 * PI, max_relative = 1e-14);
    }

    #[test]
    fn sphere_potential_at_centre() {
        let r = 0.7;
        let mu = sphere_measure(&[0.0, 0.0, 0.0], r, 1.0, 4000).unwrap();
        let u = potential(&mu, KernelSpec::Riesz { dim: 3 }, &[0.0; 3]).unwrap();
        assert!((u * r - 1.0).abs() < 1e-3);
        for x in mu.coords().chunks(3) {
            assert_relative_eq!(x.iter().map(|c| c * c).sum::<f64>().sqrt(), r, max_relative = 1e-12);
        }
    }

    #[test]
    fn sphere_guards() {
        assert!(sphere_measure(&[0.0, 0.0], 1.0, 1.0, 7).is_err());
        assert!(sphere_measure(&[0.0; 4], 1.0, 1.0, 100).is_err());
        assert!(sphere_measure(&[0.0; 3], -1.0, 1.0, 100).is_err());
    }

    #[test]
    fn solid_ball_is_symmetric() {
        let mu = solid_ball_measure(&[0.1, 0.2, 0.3], 0.5, 0.1, 2.0).unwrap();
        assert_relative_eq!(mu.total_mass(), 2.0, max_relative = 1e-13);
        // Cells are symmetric about the centre.
        let mut mean = [0.0; 3];
        for x in mu.coords().chunks(3) {
            for c in 0..3 {
                mean[c] += x[c] / mu.len() as f64;
            }
        }
        assert_relative_eq!(mean[0], 0.1, epsilon = 1e-12);
        assert_relative_eq!(mean[2], 0.3, epsilon = 1e-12);
        // Cell count approximates the ball volume.
        let vol = mu.len() as f64 * 1e-3;
        assert!((vol - 4.0 / 3.0 * PI * 0.125).abs() < 0.05);
    }
}
