use crate::error::{Error, Result};
use crate::linalg::{det_small, gram, inv_sqrt_psd, small_eigs, SmallSymmetric, TallMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuccessCheck {
    /// `min_z ‖U Y z‖² / ‖Y z‖²`.
    pub lambda_min_ratio: f64,
    pub succeeded: bool,
}

/// `(BᵀY)ᵀ(BᵀY) = Yᵀ U Y` for an orthonormal basis `B` of the target subspace.
fn projected_gram(y: &TallMatrix, basis: &TallMatrix) -> Result<SmallSymmetric> {
    let c = basis.cross(y)?;
    let (q, p) = (basis.ncols(), y.ncols());
    let mut h = vec![0.0; p * p];
    for k in 0..q {
        let row = &c[k * p..(k + 1) * p];
        for a in 0..p {
            for b in 0..p {
                h[a * p + b] += row[a] * row[b];
            }
        }
    }
    Ok(SmallSymmetric::symmetrized(p, h))
}

/// Smallest eigenvalue of `G^{-1/2} Yᵀ U Y G^{-1/2}` with `G = YᵀY`; the
/// run has succeeded when it is at least `1 − ε`.
pub fn success_metric(y: &TallMatrix, basis: &TallMatrix, epsilon: f64) -> Result<SuccessCheck> {
    let h = projected_gram(y, basis)?;
    let g = gram(y);
    let ratio = if y.ncols() == 1 {
        let g0 = g.get(0, 0);
        if !(g0 > 0.0) {
            return Err(Error::RankDeficient { eigenvalue: g0, largest: g0 });
        }
        h.get(0, 0) / g0
    } else {
        let m = inv_sqrt_psd(&g)?;
        *small_eigs(&h.congruence(&m))?.last().expect("p >= 1")
    };
    Ok(SuccessCheck { lambda_min_ratio: ratio, succeeded: ratio >= 1.0 - epsilon })
}

/// `τ = det(YᵀUY) / det(YᵀWY)` with `W = cI + (1 − c)U`, `c = γq/(np²)`.
pub fn tau_metric(y: &TallMatrix, basis: &TallMatrix, gamma: f64, n: usize, p: usize, q: usize) -> Result<f64> {
    let c = gamma * q as f64 / (n as f64 * (p * p) as f64);
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::Parameter(format!("tau needs gamma*q/(n*p^2) in (0, 1], got {c}")));
    }
    let h = projected_gram(y, basis)?;
    let g = gram(y);
    let num = det_small(&h);
    let den = det_small(&g.combine(c, &h, 1.0 - c));
    if !(den > 0.0) {
        return Err(Error::RankDeficient { eigenvalue: den, largest: det_small(&g) });
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_orthonormal, Vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn col(v: &[f64]) -> TallMatrix {
        TallMatrix::from_columns(&[Vector::new(v.to_vec()).unwrap()]).unwrap()
    }

    #[test]
    fn success_examples() {
        let u = col(&[1.0, 0.0, 0.0]);
        assert_eq!(success_metric(&col(&[2.0, 0.0, 0.0]), &u, 0.1).unwrap().lambda_min_ratio, 1.0);
        assert_eq!(success_metric(&col(&[0.0, 1.0, 1.0]), &u, 0.1).unwrap().lambda_min_ratio, 0.0);
        let t = std::f64::consts::FRAC_PI_6;
        let r = success_metric(&col(&[t.cos(), t.sin(), 0.0]), &u, 0.1).unwrap().lambda_min_ratio;
        assert!((r - 0.75).abs() < 1e-15);
    }

    #[test]
    fn success_invariant_under_right_multiplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let basis = random_orthonormal(8, 3, &mut rng).unwrap();
        let y = random_orthonormal(8, 2, &mut rng).unwrap();
        let b = SmallSymmetric::new(2, vec![2.0, 0.7, 0.7, 1.0]).unwrap();
        let a = success_metric(&y, &basis, 0.1).unwrap().lambda_min_ratio;
        let c = success_metric(&y.mul_small(&b).unwrap(), &basis, 0.1).unwrap().lambda_min_ratio;
        assert!((a - c).abs() < 1e-10);
    }

    #[test]
    fn tau_examples() {
        let u = col(&[1.0, 0.0]);
        assert!((tau_metric(&col(&[3.0, 0.0]), &u, 0.2, 2, 1, 1).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(tau_metric(&col(&[0.0, 1.0]), &u, 0.2, 2, 1, 1).unwrap(), 0.0);
        // c = γ/n = 0.1: τ = 0.5 / (0.1·1 + 0.9·0.5)
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let tau = tau_metric(&col(&[h, h]), &u, 0.2, 2, 1, 1).unwrap();
        assert!((tau - 0.5 / 0.55).abs() < 1e-12);
        assert!(tau_metric(&col(&[h, h]), &u, 0.0, 2, 1, 1).is_err());
    }
}
