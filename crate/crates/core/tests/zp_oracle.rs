use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use alecton::analysis::{z1_closed_form, z1_quadrature, zp_monte_carlo};

/// `2(1 − E[det(I + c G⁻¹)⁻¹])` for `p = 2` with the inverse and determinant
/// written out by hand.
fn z2_explicit(gamma: f64, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = gamma / 2.0;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let r: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let g11 = r[0] * r[0] + r[2] * r[2];
        let g22 = r[1] * r[1] + r[3] * r[3];
        let g12 = r[0] * r[1] + r[2] * r[3];
        let det_g = g11 * g22 - g12 * g12;
        let (i11, i22, i12) = (g22 / det_g, g11 / det_g, -g12 / det_g);
        let m = (1.0 + c * i11) * (1.0 + c * i22) - (c * i12).powi(2);
        let v = 1.0 / m;
        s1 += v;
        s2 += v * v;
    }
    let n = samples as f64;
    let mean = s1 / n;
    let se = ((s2 / n - mean * mean) / (n - 1.0)).sqrt();
    (2.0 * (1.0 - mean), 2.0 * se)
}

#[test]
fn two_by_two_matches_explicit_inverse() {
    for (i, gamma) in [0.01, 0.05, 0.1].into_iter().enumerate() {
        let mc = zp_monte_carlo(2, gamma, 100_000, 40 + i as u64).unwrap();
        let (value, se) = z2_explicit(gamma, 100_000, 90 + i as u64);
        let tol = 3.0 * (mc.std_err.powi(2) + se.powi(2)).sqrt();
        assert!((mc.value - value).abs() < tol, "gamma {gamma}: {} vs {value} (tol {tol})", mc.value);
    }
}

#[test]
fn larger_p_has_larger_value_at_fixed_gamma() {
    let z1 = zp_monte_carlo(1, 0.05, 100_000, 1).unwrap();
    let (z2, se2) = z2_explicit(0.05, 100_000, 2);
    assert!(z2 - z1.value > 5.0 * (z1.std_err.powi(2) + se2.powi(2)).sqrt());
}

#[test]
fn increasing_in_gamma() {
    for p in [1, 3] {
        let v: Vec<f64> = [0.01, 0.05, 0.1].iter().map(|&g| zp_monte_carlo(p, g, 100_000, 5).unwrap().value).collect();
        assert!(v[0] < v[1] && v[1] < v[2], "p={p}: {v:?}");
    }
}

#[test]
fn closed_form_below_square_root_bound() {
    for k in 0..200 {
        let gamma = k as f64 * 0.05;
        let z = z1_closed_form(gamma).unwrap();
        assert!(z <= (2.0 * std::f64::consts::PI * gamma).sqrt() + 1e-15);
    }
    for gamma in [0.001, 0.3, 2.0] {
        assert!((z1_closed_form(gamma).unwrap() - z1_quadrature(gamma, 200_000)).abs() < 1e-6);
    }
}

#[test]
fn estimate_is_thread_independent() {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let single = pool.install(|| zp_monte_carlo(3, 0.05, 20_000, 11).unwrap());
    let multi = zp_monte_carlo(3, 0.05, 20_000, 11).unwrap();
    assert_eq!(single, multi);
}
