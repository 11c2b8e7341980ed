//! One function per sampling model. Each `draw_*` consumes randomness from
//! the caller's stream; the matching `*_sample` builds the same operator from
//! explicit choices so that individual draws can be checked by hand.

use rand::Rng;
use rand_distr::StandardNormal;

use super::op::{SampleOp, Term, TermVector};
use super::truth::{GroundTruth, SubspaceTruth, TripletMatrix};
use crate::linalg::{norm, Vector};

/// `n² A_ij e_i e_jᵀ` for chosen `(i, j)`.
pub fn entrywise_sample(truth: &GroundTruth, i: usize, j: usize) -> SampleOp {
    let n = truth.dim();
    let scale = (n * n) as f64 * truth.entry(i, j);
    SampleOp::from_terms(n, vec![Term::new(scale, TermVector::Basis(i), TermVector::Basis(j))])
}

/// Entrywise sampling: `i, j` independent and uniform.
pub fn draw_entrywise<R: Rng + ?Sized>(truth: &GroundTruth, rng: &mut R) -> SampleOp {
    let n = truth.dim();
    let i = rng.random_range(0..n);
    let j = rng.random_range(0..n);
    entrywise_sample(truth, i, j)
}

/// `mn M_ij (e_i e_{m+j}ᵀ + e_{m+j} e_iᵀ)` in the `(m + n)`-dimensional embedding.
pub fn rect_sample(truth: &TripletMatrix, i: usize, j: usize) -> SampleOp {
    let (m, n) = (truth.rows(), truth.cols());
    let scale = (m * n) as f64 * truth.get(i, j);
    SampleOp::from_terms(
        m + n,
        vec![
            Term::new(scale, TermVector::Basis(i), TermVector::Basis(m + j)),
            Term::new(scale, TermVector::Basis(m + j), TermVector::Basis(i)),
        ],
    )
}

pub fn draw_rect<R: Rng + ?Sized>(truth: &TripletMatrix, rng: &mut R) -> SampleOp {
    let i = rng.random_range(0..truth.rows());
    let j = rng.random_range(0..truth.cols());
    rect_sample(truth, i, j)
}

/// `n² v vᵀ A w wᵀ`, stored as the single term `(n² vᵀAw) v wᵀ`.
pub fn trace_sample(truth: &GroundTruth, v: &[f64], w: &[f64]) -> SampleOp {
    let n = truth.dim();
    let scale = (n * n) as f64 * truth.bilinear(v, w);
    SampleOp::from_terms(
        n,
        vec![Term::new(scale, TermVector::dense(v.to_vec()), TermVector::dense(w.to_vec()))],
    )
}

/// Trace sampling with `v, w` independent and uniform on the unit sphere.
pub fn draw_trace<R: Rng + ?Sized>(truth: &GroundTruth, rng: &mut R) -> SampleOp {
    let n = truth.dim();
    let v = Vector::random_unit(n, rng);
    let w = Vector::random_unit(n, rng);
    trace_sample(truth, &v, &w)
}

/// Trace sample built only from the quadratic measurements `u₁ᵀAu₁` and
/// `u₂ᵀAu₂`: with `u ∝ u₁ + u₂` and `v ∝ u₁ − u₂`,
/// `uᵀAv = (u₁ᵀAu₁ − u₂ᵀAu₂) / (‖u₁ + u₂‖ ‖u₁ − u₂‖)`.
///
/// Returns `None` when either combination is numerically zero.
pub fn trace_symmetric_sample(truth: &GroundTruth, u1: &[f64], u2: &[f64]) -> Option<SampleOp> {
    let n = truth.dim();
    let sum: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| a + b).collect();
    let diff: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| a - b).collect();
    let (ns, nd) = (norm(&sum), norm(&diff));
    if ns < 1e-12 || nd < 1e-12 {
        return None;
    }
    let q1 = truth.bilinear(u1, u1);
    let q2 = truth.bilinear(u2, u2);
    let measurement = (q1 - q2) / (ns * nd);
    let u = sum.into_iter().map(|x| x / ns).collect();
    let v = diff.into_iter().map(|x| x / nd).collect();
    Some(SampleOp::from_terms(
        n,
        vec![Term::new((n * n) as f64 * measurement, TermVector::dense(u), TermVector::dense(v))],
    ))
}

/// `u₁, u₂` are independent standard Gaussian vectors, so `u₁ ± u₂` are
/// independent and their directions independent and uniform.
pub fn draw_trace_symmetric<R: Rng + ?Sized>(truth: &GroundTruth, rng: &mut R) -> SampleOp {
    let n = truth.dim();
    loop {
        let u1: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let u2: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(op) = trace_symmetric_sample(truth, &u1, &u2) {
            return op;
        }
    }
}

/// `r n² m⁻² Q v vᵀ R` for a unit `v` in the subspace and 0/1 coordinate masks.
pub fn subspace_sample(truth: &SubspaceTruth, m_keep: usize, v: &[f64], q: &[bool], r: &[bool]) -> SampleOp {
    let n = truth.dim();
    let scale = truth.rank() as f64 * (n * n) as f64 / (m_keep * m_keep) as f64;
    let mask = |keep: &[bool]| -> Vec<f64> {
        v.iter().zip(keep).map(|(&x, &k)| if k { x } else { 0.0 }).collect()
    };
    SampleOp::from_terms(
        n,
        vec![Term::new(scale, TermVector::dense(mask(q)), TermVector::dense(mask(r)))],
    )
}

fn random_subspace_vector<R: Rng + ?Sized>(truth: &SubspaceTruth, rng: &mut R) -> Vec<f64> {
    let g = Vector::random_unit(truth.rank(), rng);
    truth.basis().mul_vec(&g)
}

/// Subspace sampling with independent Bernoulli(`m/n`) diagonal projections `Q`, `R`.
pub fn draw_subspace<R: Rng + ?Sized>(truth: &SubspaceTruth, rng: &mut R, m_keep: usize) -> SampleOp {
    let n = truth.dim();
    let v = random_subspace_vector(truth, rng);
    let rate = m_keep as f64 / n as f64;
    let q: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < rate).collect();
    let r: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < rate).collect();
    subspace_sample(truth, m_keep, &v, &q, &r)
}

/// Subspace sampling from a single revealed mask `S`.
///
/// Each coordinate is revealed with probability `1 − (1 − π)²`, `π = m/n`,
/// and a revealed coordinate goes to `Q` only, `R` only, or both with
/// probabilities proportional to `π(1 − π)`, `π(1 − π)`, `π²`. Then
/// `Q = QS`, `R = RS`, and `Q`, `R` are independent Bernoulli(`π`) masks.
pub fn draw_subspace_split<R: Rng + ?Sized>(truth: &SubspaceTruth, rng: &mut R, m_keep: usize) -> SampleOp {
    let n = truth.dim();
    let v = random_subspace_vector(truth, rng);
    let rate = m_keep as f64 / n as f64;
    let one_side = rate * (1.0 - rate);
    let reveal = 1.0 - (1.0 - rate) * (1.0 - rate);
    let mut q = vec![false; n];
    let mut r = vec![false; n];
    for k in 0..n {
        let u = rng.random::<f64>();
        if u >= reveal {
            continue;
        }
        if u < one_side {
            q[k] = true;
        } else if u < 2.0 * one_side {
            r[k] = true;
        } else {
            q[k] = true;
            r[k] = true;
        }
    }
    subspace_sample(truth, m_keep, &v, &q, &r)
}
