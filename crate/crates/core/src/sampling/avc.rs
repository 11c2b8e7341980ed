//! Monte Carlo check of the two variance-condition inequalities
//! `E[yᵀÃᵀWÃy] ≤ σ_a² tr(W) ‖y‖²` and `E[(yᵀÃy)²] ≤ σ_r² ‖y‖⁴`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{GroundTruth, SampleSource, Sampler, VarianceParams};
use crate::error::{Error, Result};
use crate::linalg::{dot, Vector};

pub const AVC_PAIRS: usize = 10;

/// `W = c₀ I + c₁ (I + B) + c₂ B²` with `B = A / ‖A‖_F`, so `W` is PSD and
/// commutes with `A` for any symmetric `A`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightPolynomial {
    pub c: [f64; 3],
    pub norm: f64,
}

impl WeightPolynomial {
    pub fn random(truth: &GroundTruth, rng: &mut ChaCha8Rng) -> Self {
        let c = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        Self { c, norm: truth.frobenius_sq().sqrt() }
    }

    /// `xᵀ W x`.
    pub fn quadratic(&self, truth: &GroundTruth, x: &[f64]) -> f64 {
        let xx = dot(x, x);
        let bx: Vec<f64> = truth.matvec(x).into_iter().map(|v| v / self.norm).collect();
        self.c[0] * xx + self.c[1] * (xx + dot(x, &bx)) + self.c[2] * dot(&bx, &bx)
    }

    pub fn trace(&self, truth: &GroundTruth) -> f64 {
        let n = truth.dim() as f64;
        self.c[0] * n + self.c[1] * (n + truth.trace() / self.norm) + self.c[2]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AvcCheck {
    pub estimate: f64,
    pub std_err: f64,
    pub bound: f64,
    pub passed: bool,
}

impl AvcCheck {
    fn new(samples: &[f64], bound: f64) -> Self {
        let (estimate, std_err) = mean_and_se(samples);
        let rel = if estimate > 0.0 { std_err / estimate } else { 0.0 };
        Self { estimate, std_err, bound, passed: estimate <= bound * (1.0 + 3.0 * rel) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AvcPair {
    pub y: Vector,
    pub weight: WeightPolynomial,
    pub angular: AvcCheck,
    pub radial: AvcCheck,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AvcReport {
    pub params: VarianceParams,
    pub trials: usize,
    pub pairs: Vec<AvcPair>,
}

impl AvcReport {
    pub fn passed(&self) -> bool {
        self.pairs.iter().all(|p| p.angular.passed && p.radial.passed)
    }
}

pub(crate) fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Checks the sampler against its own lemma parameters. A deterministic
/// sampler is checked against `σ_a² = σ_r² = ‖A‖_F²`, which any fixed `A` meets.
pub fn empirical_avc_check(sampler: &Sampler, trials: usize, rng: &mut ChaCha8Rng) -> Result<AvcReport> {
    let report = sampler.variance()?;
    let params = if report.degenerate {
        let f = sampler.truth().frobenius_sq();
        VarianceParams { sigma_a_sq: f, sigma_r_sq: f }
    } else {
        report.params
    };
    empirical_avc_check_with(sampler, params, trials, rng)
}

/// As [`empirical_avc_check`] with caller-supplied parameters.
pub fn empirical_avc_check_with(
    sampler: &Sampler,
    params: VarianceParams,
    trials: usize,
    rng: &mut ChaCha8Rng,
) -> Result<AvcReport> {
    if trials == 0 {
        return Err(Error::Parameter("AVC check needs at least one trial".into()));
    }
    let truth = sampler.truth();
    let n = truth.dim();
    let mut pairs = Vec::with_capacity(AVC_PAIRS);
    let mut ang = vec![0.0; trials];
    let mut rad = vec![0.0; trials];
    for _ in 0..AVC_PAIRS {
        let y = Vector::random_unit(n, rng);
        let weight = WeightPolynomial::random(truth, rng);
        for t in 0..trials {
            let op = sampler.draw(rng);
            let ay = op.apply(&y);
            ang[t] = weight.quadratic(truth, &ay);
            rad[t] = dot(&y, &ay).powi(2);
        }
        let angular = AvcCheck::new(&ang, params.sigma_a_sq * weight.trace(truth));
        let radial = AvcCheck::new(&rad, params.sigma_r_sq);
        pairs.push(AvcPair { y, weight, angular, radial });
    }
    Ok(AvcReport { params, trials, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{SamplerKind, SpectralTruth};
    use rand::SeedableRng;
    use std::sync::Arc;

    #[test]
    fn weight_matches_dense_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let basis = crate::linalg::random_orthonormal(3, 3, &mut rng).unwrap();
        let truth = GroundTruth::Spectral(SpectralTruth::new(vec![2.0, 0.5, -1.0], basis).unwrap());
        let w = WeightPolynomial::random(&truth, &mut rng);
        let a = truth.dense();
        let s = w.norm;
        let mut dense = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                let b2: f64 = (0..3).map(|k| a[i * 3 + k] * a[k * 3 + j]).sum::<f64>() / (s * s);
                let id = if i == j { 1.0 } else { 0.0 };
                dense[i * 3 + j] = w.c[0] * id + w.c[1] * (id + a[i * 3 + j] / s) + w.c[2] * b2;
            }
        }
        let x = [0.3, -1.0, 0.5];
        let want: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| x[i] * dense[i * 3 + j] * x[j]).sum();
        assert!((w.quadratic(&truth, &x) - want).abs() < 1e-12);
        assert!((w.trace(&truth) - (0..3).map(|i| dense[i * 4]).sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn exact_sampler_passes() {
        let truth = Arc::new(GroundTruth::Spectral(SpectralTruth::diagonal(&[2.0, 1.0]).unwrap()));
        let s = Sampler::new(SamplerKind::Exact, truth).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let report = empirical_avc_check(&s, 10, &mut rng).unwrap();
        assert!(report.passed());
        assert!(report.pairs.iter().all(|p| p.angular.std_err <= 1e-12 * p.angular.estimate));
    }
}
