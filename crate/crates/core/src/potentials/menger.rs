use crate::error::{Error, Result};
use crate::measures::SignedAtomicMeasure;
use crate::summation::KahanSum;

/// `Σ_{i<j<k} c(x_i, x_j, x_k)² w_i w_j w_k` with `c` the Menger curvature
/// (inverse circumradius, zero for collinear triples). Planar only; cubic
/// cost, so measures above `cap_n` atoms are refused.
pub fn menger_energy(mu: &SignedAtomicMeasure, cap_n: usize) -> Result<f64> {
    if mu.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: mu.dim(),
        });
    }
    let n = mu.len();
    if n > cap_n {
        return Err(Error::TooManyAtoms { count: n, cap: cap_n });
    }
    let mut acc = KahanSum::new();
    for i in 0..n {
        let p = mu.location(i);
        for j in i + 1..n {
            let q = mu.location(j);
            let (ux, uy) = (q[0] - p[0], q[1] - p[1]);
            let a2 = ux * ux + uy * uy;
            let wij = mu.weight(i) * mu.weight(j);
            for k in j + 1..n {
                let s = mu.location(k);
                let (vx, vy) = (s[0] - p[0], s[1] - p[1]);
                let cross = ux * vy - uy * vx;
                if cross == 0.0 {
                    continue;
                }
                let b2 = vx * vx + vy * vy;
                let (tx, ty) = (s[0] - q[0], s[1] - q[1]);
                let c2 = tx * tx + ty * ty;
                // c² = 16·Area² / (a²b²c²) and 2·Area = |cross|.
                acc.add(4.0 * cross * cross / (a2 * b2 * c2) * wij * mu.weight(k));
            }
        }
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn planar(coords: Vec<f64>) -> SignedAtomicMeasure {
        let n = coords.len() / 2;
        SignedAtomicMeasure::new(2, coords, vec![1.0; n], 0.0).unwrap()
    }

    #[test]
    fn collinear_and_small_sets_vanish() {
        assert_eq!(menger_energy(&planar(vec![0.0, 0.0, 1.0, 1.0, 3.0, 3.0]), 10).unwrap(), 0.0);
        assert_eq!(menger_energy(&planar(vec![0.0, 0.0, 1.0, 1.0]), 10).unwrap(), 0.0);
    }

    #[test]
    fn equilateral_triangle() {
        let mu = planar(vec![0.0, 0.0, 1.0, 0.0, 0.5, 3f64.sqrt() / 2.0]);
        assert_relative_eq!(menger_energy(&mu, 10).unwrap(), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn right_triangle_uses_hypotenuse_as_diameter() {
        let mu = planar(vec![0.0, 0.0, 3.0, 0.0, 0.0, 4.0]);
        // circumradius 5/2
        assert_relative_eq!(menger_energy(&mu, 10).unwrap(), 4.0 / 25.0, epsilon = 1e-15);
    }

    #[test]
    fn guards() {
        let mu = planar(vec![0.0, 0.0, 1.0, 0.0, 0.5, 1.0, 2.0, 2.0]);
        assert!(matches!(menger_energy(&mu, 3), Err(Error::TooManyAtoms { count: 4, cap: 3 })));
        let mu3 = SignedAtomicMeasure::dirac(&[0.0, 0.0, 0.0], 1.0).unwrap();
        assert!(menger_energy(&mu3, 3).is_err());
    }
}
