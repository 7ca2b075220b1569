use std::f64::consts::PI;

use approx::assert_relative_eq;
use potlab::capacity::{
    equilibrium_solve, operator_norm_estimate, superadditivity_check, Disc, OpNormOptions, PointCloud, SolverOptions,
};
use potlab::constructions::{cantor_build, sigma_sequence, CantorFamily, CantorSpec};
use potlab::potentials::{gradient, menger_energy, potential, truncated_transform};
use potlab::{KernelSpec, MeasureFunction, SignedAtomicMeasure};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

/// Atoms in `[-half, half]^dim` with weights in `[lo, hi]`.
fn measure(dim: usize, n: std::ops::Range<usize>, half: f64, lo: f64, hi: f64) -> impl Strategy<Value = SignedAtomicMeasure> {
    n.prop_flat_map(move |n| {
        (
            prop::collection::vec(-half..half, n * dim),
            prop::collection::vec(lo..hi, n),
        )
    })
    .prop_map(move |(coords, weights)| SignedAtomicMeasure::new(dim, coords, weights, 0.0).unwrap())
}

fn point(dim: usize, half: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-half..half, dim)
}

/// Row-major rotation about a random axis (a plane rotation when `dim = 2`).
fn rotation(dim: usize, angle: f64, axis: &[f64]) -> Vec<f64> {
    let (s, c) = angle.sin_cos();
    if dim == 2 {
        return vec![c, -s, s, c];
    }
    let n = axis.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
    let (x, y, z) = (axis[0] / n, axis[1] / n, axis[2] / n);
    let t = 1.0 - c;
    vec![
        t * x * x + c,
        t * x * y - s * z,
        t * x * z + s * y,
        t * x * y + s * z,
        t * y * y + c,
        t * y * z - s * x,
        t * x * z - s * y,
        t * y * z + s * x,
        t * z * z + c,
    ]
}

fn min_distance(mu: &SignedAtomicMeasure, x: &[f64]) -> f64 {
    mu.distance_to_support(x).unwrap()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn ball_mass_is_homogeneous(mu in measure(2, 1..40, 1.0, -1.0, 1.0), a in point(2, 1.0), r in 0.01..2.0f64, c in -5.0..5.0f64) {
        let scaled = mu.scaled(c).ball_mass(&a, r).unwrap();
        let plain = mu.ball_mass(&a, r).unwrap();
        prop_assert!((scaled - c * plain).abs() <= 1e-12 * (1.0 + mu.total_variation() * c.abs()));
    }

    #[test]
    fn ball_mass_grows_with_radius(mu in measure(3, 1..40, 1.0, 0.0, 1.0), a in point(3, 1.0), r in 0.01..2.0f64, dr in 0.0..1.0f64) {
        prop_assert!(mu.ball_mass(&a, r).unwrap() <= mu.ball_mass(&a, r + dr).unwrap() + 1e-12);
    }

    #[test]
    fn total_variation_is_subadditive(mu in measure(2, 1..30, 1.0, -1.0, 1.0), nu in measure(2, 1..30, 1.0, -1.0, 1.0)) {
        let sum = mu.plus(&nu).unwrap();
        prop_assert!(sum.total_variation() <= mu.total_variation() + nu.total_variation() + 1e-12);
    }

    #[test]
    fn total_variation_adds_over_disjoint_supports(mu in measure(2, 1..30, 1.0, -1.0, 1.0), nu in measure(2, 1..30, 1.0, -1.0, 1.0)) {
        let far = nu.translated(&[10.0, 0.0]).unwrap();
        let sum = mu.plus(&far).unwrap();
        assert_relative_eq!(sum.total_variation(), mu.total_variation() + nu.total_variation(), max_relative = 1e-12);
    }

    #[test]
    fn dyadic_translation_keeps_ball_mass_exact(
        cells in prop::collection::vec((-64i32..64, -64i32..64, 1i32..16), 1..30),
        a in (-64i32..64, -64i32..64),
        shift in (-256i32..256, -256i32..256),
        r in 1i32..64,
    ) {
        let dyadic = |k: i32| k as f64 / 64.0;
        let coords: Vec<f64> = cells.iter().flat_map(|&(x, y, _)| [dyadic(x), dyadic(y)]).collect();
        let weights: Vec<f64> = cells.iter().map(|&(_, _, w)| dyadic(w)).collect();
        let mu = SignedAtomicMeasure::new(2, coords, weights, 0.0).unwrap();
        let v = [dyadic(shift.0), dyadic(shift.1)];
        let moved = mu.translated(&v).unwrap();
        let centre = [dyadic(a.0), dyadic(a.1)];
        let moved_centre = [centre[0] + v[0], centre[1] + v[1]];
        let r = dyadic(r);
        prop_assert_eq!(mu.ball_mass(&centre, r).unwrap().to_bits(), moved.ball_mass(&moved_centre, r).unwrap().to_bits());
    }

    #[test]
    fn potential_is_linear(
        mu in measure(3, 1..30, 1.0, -1.0, 1.0),
        nu in measure(3, 1..30, 1.0, -1.0, 1.0),
        x in point(3, 1.0),
        alpha in -3.0..3.0f64,
        beta in -3.0..3.0f64,
    ) {
        let k = KernelSpec::riesz(3).unwrap();
        prop_assume!(min_distance(&mu, &x) > 1e-3 && min_distance(&nu, &x) > 1e-3);
        let combined = mu.scaled(alpha).plus(&nu.scaled(beta)).unwrap();
        let lhs = potential(&combined, k, &x).unwrap();
        let (pm, pn) = (potential(&mu, k, &x).unwrap(), potential(&nu, k, &x).unwrap());
        let scale = alpha.abs() * (mu.total_variation() / 1e-3) + beta.abs() * (nu.total_variation() / 1e-3);
        prop_assert!((lhs - (alpha * pm + beta * pn)).abs() <= 1e-12 * (1.0 + scale));
    }

    #[test]
    fn riesz_potential_scales_inversely(mu in measure(3, 1..30, 1.0, -1.0, 1.0), x in point(3, 1.0), lambda in 0.1..10.0f64) {
        let k = KernelSpec::riesz(3).unwrap();
        prop_assume!(min_distance(&mu, &x) > 1e-2);
        let big = mu.dilated(lambda).unwrap();
        let lx: Vec<f64> = x.iter().map(|c| c * lambda).collect();
        let expected = potential(&mu, k, &x).unwrap() / lambda;
        let bound = mu.total_variation() / 1e-2 / lambda;
        prop_assert!((potential(&big, k, &lx).unwrap() - expected).abs() <= 1e-10 * (1.0 + bound));
    }

    #[test]
    fn log_potential_shifts_under_dilation(mu in measure(2, 1..30, 0.2, -1.0, 1.0), x in point(2, 0.2), lambda in 0.2..2.0f64) {
        prop_assume!(min_distance(&mu, &x) > 1e-2);
        let big = mu.dilated(lambda).unwrap();
        let lx: Vec<f64> = x.iter().map(|c| c * lambda).collect();
        let expected = potential(&mu, KernelSpec::Log, &x).unwrap() + mu.total_mass() * (1.0 / lambda).ln();
        let got = potential(&big, KernelSpec::Log, &lx).unwrap();
        prop_assert!((got - expected).abs() <= 1e-10 * (1.0 + mu.total_variation() * 10.0));
    }

    #[test]
    fn truncated_transform_flips_under_reflection(mu in measure(2, 1..40, 1.0, -1.0, 1.0), a in point(2, 1.0), eps in 0.01..1.0f64) {
        let direct = truncated_transform(&mu, &a, eps).unwrap();
        let mirrored = truncated_transform(&mu.reflected_through(&a).unwrap(), &a, eps).unwrap();
        let scale = mu.total_variation() / eps;
        for (p, q) in direct.iter().zip(&mirrored) {
            prop_assert!((p + q).abs() <= 1e-12 * (1.0 + scale));
        }
    }

    #[test]
    fn truncated_transform_is_constant_between_atom_distances(mu in measure(3, 2..40, 1.0, -1.0, 1.0), a in point(3, 1.0), t in 0.05..0.95f64) {
        let mut dist: Vec<f64> = (0..mu.len())
            .map(|i| mu.location(i).iter().zip(&a).map(|(y, c)| (y - c).powi(2)).sum::<f64>().sqrt())
            .collect();
        dist.sort_by(f64::total_cmp);
        let gaps: Vec<(f64, f64)> = dist.windows(2).map(|w| (w[0], w[1])).filter(|(lo, hi)| hi - lo > 1e-6).collect();
        prop_assume!(!gaps.is_empty());
        let (lo, hi) = gaps[gaps.len() / 2];
        let e1 = lo + (hi - lo) * t * 0.5;
        let e2 = lo + (hi - lo) * (0.5 + t * 0.5);
        prop_assert_eq!(truncated_transform(&mu, &a, e1).unwrap(), truncated_transform(&mu, &a, e2).unwrap());
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn menger_energy_ignores_rigid_motions_and_order(
        mu in measure(2, 3..20, 1.0, 0.1, 1.0),
        angle in 0.0..(2.0 * PI),
        t in point(2, 3.0),
        seed in any::<u64>(),
    ) {
        let base = menger_energy(&mu, 64).unwrap();
        let moved = menger_energy(&mu.transformed(&rotation(2, angle, &[]), &t).unwrap(), 64).unwrap();
        let mut order: Vec<usize> = (0..mu.len()).collect();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = SignedAtomicMeasure::from_atoms(2, order.iter().map(|&i| (mu.location(i), mu.weight(i))), 0.0).unwrap();
        let relabelled = menger_energy(&shuffled, 64).unwrap();
        assert_relative_eq!(moved, base, max_relative = 1e-8, epsilon = 1e-12);
        assert_relative_eq!(relabelled, base, max_relative = 1e-10, epsilon = 1e-12);
    }

    #[test]
    fn cantor_measures_are_probability_measures_with_separated_atoms(beta in 0.0..3.0f64, n in 1usize..6) {
        let c = cantor_build(CantorSpec { family: CantorFamily::Beta { beta }, generation: n }).unwrap();
        let mu = &c.measure;
        prop_assert_eq!(mu.len(), 4usize.pow(n as u32));
        prop_assert!((mu.total_mass() - 1.0).abs() < 1e-12);
        let gap = c.sigmas.sigma(n - 1) - 2.0 * c.sigmas.sigma(n);
        prop_assert!(gap > 0.0);
        for i in 0..mu.len() {
            for j in 0..i {
                let d = mu.location(i).iter().zip(mu.location(j)).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
                prop_assert!(d >= gap * (1.0 - 1e-12), "atoms {i} and {j} at {d} < {gap}");
            }
        }
    }

    #[test]
    fn gauge_sides_solve_the_mass_identity(beta in 0.0..0.75f64, n in 1usize..40) {
        let gauge = MeasureFunction::LogPower { beta };
        let seq = sigma_sequence(CantorFamily::Gauge { gauge }, n).unwrap();
        let expected = -(n as f64) * 4f64.ln();
        let got = gauge.ln_eval_at_log_scale(seq.log_inv(n));
        prop_assert!((got - expected).abs() <= 1e-12 * expected.abs());
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn equilibrium_never_exceeds_uniform_energy(mu in measure(3, 2..60, 1.0, 0.5, 1.5)) {
        let cloud = PointCloud::new(3, mu.coords().to_vec(), 0.01).unwrap();
        let eq = equilibrium_solve(&cloud, KernelSpec::riesz(3).unwrap(), SolverOptions::default()).unwrap();
        prop_assert!(eq.energy <= eq.initial_energy * (1.0 + 1e-12));
        let w: f64 = eq.weights.iter().sum();
        prop_assert!((w - 1.0).abs() < 1e-9);
        prop_assert!(eq.weights.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn riesz_capacity_scales_linearly(mu in measure(3, 4..60, 1.0, 0.5, 1.5), lambda in 0.2..5.0f64) {
        let k = KernelSpec::riesz(3).unwrap();
        let opts = SolverOptions::with_tol(1e-8);
        let base = equilibrium_solve(&PointCloud::new(3, mu.coords().to_vec(), 0.01).unwrap(), k, opts).unwrap();
        let coords: Vec<f64> = mu.coords().iter().map(|c| c * lambda).collect();
        let big = equilibrium_solve(&PointCloud::new(3, coords, 0.01 * lambda).unwrap(), k, opts).unwrap();
        assert_relative_eq!(big.capacity, lambda * base.capacity, max_relative = 0.01);
    }

    #[test]
    fn adding_points_never_lowers_capacity(mu in measure(3, 2..40, 1.0, 0.5, 1.5), extra in measure(3, 1..20, 1.0, 0.5, 1.5)) {
        let k = KernelSpec::riesz(3).unwrap();
        let opts = SolverOptions::with_tol(1e-9);
        let small = equilibrium_solve(&PointCloud::new(3, mu.coords().to_vec(), 0.01).unwrap(), k, opts).unwrap();
        let mut coords = mu.coords().to_vec();
        coords.extend_from_slice(extra.coords());
        let large = equilibrium_solve(&PointCloud::new(3, coords, 0.01).unwrap(), k, opts).unwrap();
        // Both energies are within the duality gap of their minima.
        prop_assert!(large.capacity >= small.capacity * (1.0 - 2e-9));
    }

    #[test]
    fn operator_norm_ignores_rigid_motions(
        mu in measure(3, 3..40, 1.0, 0.1, 1.0),
        angle in 0.0..(2.0 * PI),
        axis in point(3, 1.0),
        t in point(3, 2.0),
        eps in 0.05..0.5f64,
    ) {
        prop_assume!(axis.iter().map(|v| v * v).sum::<f64>() > 0.01);
        let opts = OpNormOptions { tol: 1e-12, max_iter: 20_000, ..OpNormOptions::default() };
        let moved = mu.transformed(&rotation(3, angle, &axis), &t).unwrap();
        let a = operator_norm_estimate(&mu, eps, opts).unwrap();
        let b = operator_norm_estimate(&moved, eps, opts).unwrap();
        // Pairs at distance eps can land on either side of the cut after
        // rounding, so compare only when no pair sits that close to it.
        let tight = (0..mu.len()).any(|i| (0..i).any(|j| {
            let d = mu.location(i).iter().zip(mu.location(j)).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            (d - eps).abs() < 1e-9
        }));
        prop_assume!(!tight);
        assert_relative_eq!(a.norm, b.norm, max_relative = 1e-4, epsilon = 1e-12);
    }

    #[test]
    fn union_capacity_never_exceeds_the_sum(
        offsets in prop::collection::vec((0.0..0.3f64, 0.0..0.3f64), 2..4),
        radius in 1e-6..1e-3f64,
    ) {
        let discs: Vec<Disc> = offsets
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Disc { centre: [x - 0.15 + i as f64 * 0.01, y - 0.15], radius })
            .collect();
        let separated = discs.iter().enumerate().all(|(i, p)| discs[..i].iter().all(|q| {
            (p.centre[0] - q.centre[0]).hypot(p.centre[1] - q.centre[1]) > 4.0 * radius
        }));
        prop_assume!(separated);
        let rep = superadditivity_check(&discs).unwrap();
        prop_assert!(rep.ratio <= 1.0 + 1e-6, "ratio {}", rep.ratio);
        if rep.hypothesis_holds {
            prop_assert!(rep.ratio >= 0.5, "ratio {}", rep.ratio);
        }
    }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn gradient_matches_central_differences(mu in measure(3, 1..30, 1.0, -1.0, 1.0), x in point(3, 1.5)) {
        let k = KernelSpec::riesz(3).unwrap();
        let step = 1e-5;
        prop_assume!(min_distance(&mu, &x) >= 1e3 * step);
        let g = gradient(&mu, k, &x).unwrap();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..3 {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[i] += step;
            lo[i] -= step;
            let fd = (potential(&mu, k, &hi).unwrap() - potential(&mu, k, &lo).unwrap()) / (2.0 * step);
            prop_assert!((fd - g[i]).abs() <= 1e-6 * norm.max(1e-3), "component {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn potential_is_harmonic_off_the_support(mu in measure(3, 1..30, 0.5, -1.0, 1.0), x in point(3, 1.0)) {
        let k = KernelSpec::riesz(3).unwrap();
        prop_assume!(min_distance(&mu, &x) >= 0.1);
        // The seven-point stencil errs by about 3.5 (step/distance)^2 relative.
        let step = 1e-4;
        let centre = potential(&mu, k, &x).unwrap();
        let mut lap = 0.0;
        for i in 0..3 {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[i] += step;
            lo[i] -= step;
            lap += potential(&mu, k, &hi).unwrap() + potential(&mu, k, &lo).unwrap() - 2.0 * centre;
        }
        lap /= step * step;
        let local = mu.iter().map(|(_, w)| w.abs()).sum::<f64>() / min_distance(&mu, &x);
        prop_assert!(lap.abs() < 1e-4 * local, "laplacian {lap}, magnitude {local}");
    }
}
