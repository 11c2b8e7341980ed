//! Counterexamples and the lower bound on the convergence rate.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, small_eigs, SmallSymmetric, TallMatrix, Vector};
use crate::recovery::DIVERGENCE_LIMIT;
use crate::sampling::{SampleOp, SampleSource, Term, TermVector};
use crate::seed::{derive_seed, stream_rng};

#[derive(Clone, Debug, PartialEq)]
pub struct DivergenceReport {
    /// `x_0, x_1, …` up to the last value within the overflow guard.
    pub trace: Vec<f64>,
    /// First `k` with `|x_k| > 1e100`.
    pub overflow_step: usize,
    /// `x_k² > α⁻¹ C^{2k} (C + 1)` at every `k ≥ 1` up to and including the overflow step.
    pub bound_held: bool,
    /// First step where the inequality failed, if any.
    pub violation: Option<usize>,
}

/// Iterates `x ← (1 − αx²) x` from `x₀` with `x₀² ≥ α⁻¹(C + 1)`.
pub fn divergence_demo(alpha: f64, c: f64, x0: f64, max_steps: usize) -> Result<DivergenceReport> {
    if !(alpha > 0.0) || !(c > 1.0) {
        return Err(Error::Parameter(format!("need alpha > 0 and C > 1, got alpha={alpha}, C={c}")));
    }
    if !(x0 * x0 >= (c + 1.0) / alpha) {
        return Err(Error::Parameter(format!("x0^2 = {} is below (C + 1)/alpha = {}", x0 * x0, (c + 1.0) / alpha)));
    }
    let mut trace = vec![x0];
    let mut x = x0;
    let mut violation = None;
    // log form of the bound so it stays finite long after x² overflows
    let log_bound = |k: usize| -alpha.ln() + 2.0 * k as f64 * c.ln() + (c + 1.0).ln();
    for k in 1..=max_steps {
        x *= 1.0 - alpha * x * x;
        let log_x2 = 2.0 * x.abs().ln();
        if violation.is_none() && !(log_x2 > log_bound(k)) && !x.is_infinite() {
            violation = Some(k);
        }
        if !(x.abs() <= DIVERGENCE_LIMIT) {
            return Ok(DivergenceReport { trace, overflow_step: k, bound_held: violation.is_none(), violation });
        }
        trace.push(x);
    }
    Err(Error::Parameter(format!("no overflow within {max_steps} steps")))
}

/// Step sizes indexed from `k = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `η₀ / (k + 1)`.
    Harmonic(f64),
    /// `η₀ √(k + 1)`, growing without bound.
    Aggressive(f64),
}

impl StepSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Constant(e) => e,
            StepSchedule::Harmonic(e) => e / (k + 1) as f64,
            StepSchedule::Aggressive(e) => e * ((k + 1) as f64).sqrt(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StepSchedule::Constant(_) => "constant",
            StepSchedule::Harmonic(_) => "harmonic",
            StepSchedule::Aggressive(_) => "aggressive",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StuckReport {
    /// `e₁ᵀ y_k` for `k = 0..=steps`.
    pub first_coordinate: Vec<f64>,
    pub final_y: [f64; 2],
    /// `‖y yᵀ − diag(4, 0)‖_F` at the end.
    pub distance_to_optimum: f64,
    pub first_coordinate_stayed_zero: bool,
}

/// Gradient descent `y ← y − 4α_k (y‖y‖² − Ay)` on `‖yyᵀ − A‖_F²` with
/// `A = diag(4, 1)`; the exact-sample form of the factored objective.
pub fn stuck_demo(schedule: StepSchedule, y0: [f64; 2], steps: usize) -> StuckReport {
    let a = [4.0, 1.0];
    let mut y = y0;
    let mut first = Vec::with_capacity(steps + 1);
    first.push(y[0]);
    let mut stayed_zero = y0[0] == 0.0;
    for k in 0..steps {
        let alpha = schedule.at(k);
        let nn = y[0] * y[0] + y[1] * y[1];
        for i in 0..2 {
            y[i] *= 1.0 - 4.0 * alpha * (nn - a[i]);
        }
        first.push(y[0]);
        stayed_zero &= y[0] == 0.0;
    }
    let dist = ((y[0] * y[0] - 4.0).powi(2) + 2.0 * (y[0] * y[1]).powi(2) + (y[1] * y[1]).powi(2)).sqrt();
    StuckReport { first_coordinate: first, final_y: y, distance_to_optimum: dist, first_coordinate_stayed_zero: stayed_zero }
}

/// `Ã = diag(λ) + ζ(u vᵀ + v uᵀ)` with `u = e_target` and `v` uniform on the
/// unit sphere. Then `E[Ãᵀuuᵀ Ã] ⪰ (ζ²/n) I` and `‖I + ηÃ‖ ≤ 1 + η(max|λ| + 2ζ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerBoundSampler {
    pub eigenvalues: Vec<f64>,
    pub target: usize,
    pub zeta: f64,
}

impl LowerBoundSampler {
    pub fn new(eigenvalues: Vec<f64>, target: usize, zeta: f64) -> Result<Self> {
        let n = eigenvalues.len();
        if n < 2 || target >= n {
            return Err(Error::Parameter(format!("target index {target} invalid in dimension {n}")));
        }
        if !(zeta > 0.0) {
            return Err(Error::Parameter("zeta must be positive".into()));
        }
        let top = eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if eigenvalues[target] >= top {
            return Err(Error::Parameter("the reference direction must not be a top eigenvector".into()));
        }
        Ok(Self { eigenvalues, target, zeta })
    }

    /// `σ² = ζ²/n`.
    pub fn sigma_sq(&self) -> f64 {
        self.zeta * self.zeta / self.eigenvalues.len() as f64
    }

    /// `C = max|λ| + 2ζ`.
    pub fn c_bound(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max) + 2.0 * self.zeta
    }

    /// Smallest eigenvalue of a Monte Carlo estimate of `E[Ãᵀuuᵀ Ã]`.
    pub fn measured_sigma_sq(&self, draws: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
        let n = self.dim();
        let mut acc = vec![0.0; n * n];
        let u = Vector::basis(n, self.target);
        for _ in 0..draws {
            let op = self.draw(rng);
            // w = Ãᵀu; the operator is symmetric
            let w = op.apply(&u);
            for i in 0..n {
                for j in 0..n {
                    acc[i * n + j] += w[i] * w[j];
                }
            }
        }
        acc.iter_mut().for_each(|x| *x /= draws as f64);
        Ok(*small_eigs(&SmallSymmetric::new(n, acc)?)?.last().expect("n >= 2"))
    }

    /// Largest observed `‖y + ηÃy‖ / ((1 + ηC)‖y‖)` over random draws.
    pub fn measured_growth_ratio(&self, draws: usize, rng: &mut ChaCha8Rng) -> f64 {
        let n = self.dim();
        let c = self.c_bound();
        let mut worst: f64 = 0.0;
        for _ in 0..draws {
            let y = Vector::random_unit(n, rng);
            let eta = 10f64.powf(rng.random_range(-3.0..2.0));
            let ay = self.draw(rng).apply(&y);
            let stepped: Vec<f64> = y.iter().zip(&ay).map(|(a, b)| a + eta * b).collect();
            worst = worst.max(norm(&stepped) / (1.0 + eta * c));
        }
        worst
    }
}

impl SampleSource for LowerBoundSampler {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> SampleOp {
        let n = self.dim();
        let mut terms: Vec<Term> = self
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, l)| **l != 0.0)
            .map(|(i, &l)| Term::new(l, TermVector::Basis(i), TermVector::Basis(i)))
            .collect();
        let v = TermVector::dense(Vector::random_unit(n, rng).into_inner());
        let u = TermVector::Basis(self.target);
        terms.push(Term::new(self.zeta, u.clone(), v.clone()));
        terms.push(Term::new(self.zeta, v, u));
        SampleOp::new(n, terms).expect("terms built in range")
    }

    fn rank_condition_holds(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerBoundReport {
    pub schedule: StepSchedule,
    pub n: usize,
    pub k_steps: usize,
    pub trials: usize,
    pub mean_rho: f64,
    pub std_err: f64,
    /// `σ² / (σ²n + C²K)`.
    pub floor: f64,
    pub sigma_sq: f64,
    pub c_bound: f64,
    pub passed: bool,
}

/// Rank-one iterations `y ← y + η_k Ã_k y` from a uniform unit start, with
/// `ρ_K = (uᵀy_K)² / ‖y_K‖²` averaged over trials. The iterate is rescaled
/// to unit norm after each step, which leaves `ρ` unchanged.
pub fn lower_bound_experiment(
    sampler: &LowerBoundSampler,
    k_steps: usize,
    schedule: StepSchedule,
    trials: usize,
    seed: u64,
) -> Result<LowerBoundReport> {
    if trials < 2 {
        return Err(Error::Parameter("need at least two trials".into()));
    }
    let n = sampler.dim();
    let target = sampler.target;
    let rhos: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(derive_seed(seed, trial as u64), 0);
            let mut y = TallMatrix::from_columns(&[Vector::random_unit(n, &mut rng)]).expect("n >= 2");
            for k in 0..k_steps {
                sampler.draw(&mut rng).step(&mut y, schedule.at(k));
                let norm_sq = y.frobenius_sq();
                if !(norm_sq.is_finite() && norm_sq > 0.0) {
                    return Err(Error::Divergence { step: k + 1 });
                }
                y.scale_in_place(1.0 / norm_sq.sqrt());
            }
            let col = y.column(0);
            Ok(col[target] * col[target] / dot(&col, &col))
        })
        .collect::<Result<_>>()?;
    let (mean_rho, std_err) = crate::sampling::avc::mean_and_se(&rhos);
    let sigma_sq = sampler.sigma_sq();
    let c_bound = sampler.c_bound();
    let floor = sigma_sq / (sigma_sq * n as f64 + c_bound * c_bound * k_steps as f64);
    Ok(LowerBoundReport {
        schedule,
        n,
        k_steps,
        trials,
        mean_rho,
        std_err,
        floor,
        sigma_sq,
        c_bound,
        passed: mean_rho >= floor - 3.0 * std_err,
    })
}
