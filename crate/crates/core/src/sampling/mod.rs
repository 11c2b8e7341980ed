//! Sampling distributions over `Ã` with `E[Ã] = A`, and their variance parameters.

pub mod avc;
pub mod draw;
pub mod op;
pub mod triplets;
pub mod truth;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{TallMatrix, Vector};
pub use op::{SampleOp, Term, TermVector};
pub use truth::{
    matrix_incoherence, subspace_incoherence, GroundTruth, SpectralTruth, SubspaceTruth, TripletMatrix,
};

/// Anything that can feed the angular and radial phases.
pub trait SampleSource: Sync {
    fn dim(&self) -> usize;

    fn draw(&self, rng: &mut ChaCha8Rng) -> SampleOp;

    /// True when every sample is rank one, or when the distribution is
    /// deterministic (no variance to control).
    fn rank_condition_holds(&self) -> bool;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    Exact,
    Entrywise,
    RectEntrywise,
    Trace,
    TraceSymmetric,
    Subspace { m_keep: usize },
    SubspaceSplit { m_keep: usize },
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Exact => "exact",
            SamplerKind::Entrywise => "entrywise",
            SamplerKind::RectEntrywise => "rect",
            SamplerKind::Trace => "trace",
            SamplerKind::TraceSymmetric => "trace-sym",
            SamplerKind::Subspace { .. } => "subspace",
            SamplerKind::SubspaceSplit { .. } => "subspace-split",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerKind::Subspace { m_keep } | SamplerKind::SubspaceSplit { m_keep } => {
                write!(f, "{}(m={m_keep})", self.name())
            }
            _ => f.write_str(self.name()),
        }
    }
}

/// Gaussian perturbation of every emitted term scale:
/// `scale · (1 + ε_m) + ε_a`, one `(ε_m, ε_a)` draw per sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub additive_sd: f64,
    pub multiplicative_sd: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceParams {
    pub sigma_a_sq: f64,
    pub sigma_r_sq: f64,
}

impl VarianceParams {
    pub fn new(sigma_a_sq: f64, sigma_r_sq: f64) -> Result<Self> {
        for v in [sigma_a_sq, sigma_r_sq] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Parameter(format!("variance parameter {v} must be finite and >= 0")));
            }
        }
        Ok(Self { sigma_a_sq, sigma_r_sq })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceReport {
    pub params: VarianceParams,
    /// No lemma applies (deterministic sampler); `params` is zero.
    pub degenerate: bool,
    /// Trace sampling with `n ≤ 50`, outside the range the trace lemma covers.
    pub small_dimension: bool,
    /// Parameters are those of the undeflated base distribution.
    pub deflated: bool,
    pub incoherence: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Sampler {
    kind: SamplerKind,
    truth: Arc<GroundTruth>,
    noise: Option<NoiseModel>,
    deflation: Vec<Vector>,
    fixed_terms: Arc<[Term]>,
    deflation_terms: Vec<Term>,
}

impl Sampler {
    pub fn new(kind: SamplerKind, truth: Arc<GroundTruth>) -> Result<Self> {
        let n = truth.dim();
        let mismatch = || Error::Config(format!("{} sampling does not apply to this ground truth", kind.name()));
        match (&kind, truth.as_ref()) {
            (SamplerKind::Exact, _) => {}
            (SamplerKind::RectEntrywise, GroundTruth::RectTriplets(_)) => {}
            (SamplerKind::RectEntrywise, _) => return Err(mismatch()),
            (SamplerKind::Subspace { m_keep } | SamplerKind::SubspaceSplit { m_keep }, t) => {
                if !matches!(t, GroundTruth::ProjectionSubspace(_)) {
                    return Err(mismatch());
                }
                if *m_keep == 0 || *m_keep > n {
                    return Err(Error::Parameter(format!("m_keep = {m_keep} must lie in 1..={n}")));
                }
            }
            (_, GroundTruth::RectTriplets(_)) => return Err(mismatch()),
            _ => {}
        }
        let fixed_terms: Arc<[Term]> = if kind == SamplerKind::Exact {
            exact_terms(&truth)?.into()
        } else {
            Arc::from(Vec::new())
        };
        Ok(Self { kind, truth, noise: None, deflation: Vec::new(), fixed_terms, deflation_terms: Vec::new() })
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn truth_arc(&self) -> &Arc<GroundTruth> {
        &self.truth
    }

    pub fn noise(&self) -> Option<NoiseModel> {
        self.noise
    }

    pub fn deflation(&self) -> &[Vector] {
        &self.deflation
    }

    /// Same distribution with Gaussian noise on every term scale.
    pub fn wrap_noisy(&self, additive_sd: f64, multiplicative_sd: f64) -> Result<Self> {
        for sd in [additive_sd, multiplicative_sd] {
            if !sd.is_finite() || sd < 0.0 {
                return Err(Error::Parameter(format!("noise standard deviation {sd} must be finite and >= 0")));
            }
        }
        let mut out = self.clone();
        out.noise = if additive_sd == 0.0 && multiplicative_sd == 0.0 {
            None
        } else {
            Some(NoiseModel { additive_sd, multiplicative_sd })
        };
        Ok(out)
    }

    /// Appends `−y yᵀ` for each recovered vector, so `E[Ã'] = E[Ã] − Σ y yᵀ`.
    pub fn deflate(&self, recovered: &[Vector]) -> Result<Self> {
        let n = self.dim();
        let mut out = self.clone();
        for y in recovered {
            if y.len() != n {
                return Err(Error::Dimension(format!("deflation vector of length {} in dimension {n}", y.len())));
            }
            let v = TermVector::dense(y.to_vec());
            out.deflation_terms.push(Term::new(-1.0, v.clone(), v));
            out.deflation.push(y.clone());
        }
        Ok(out)
    }

    /// `E[Ã]` as a dense row-major matrix; for small checks only.
    pub fn expectation_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut a = self.truth.dense();
        for y in &self.deflation {
            for i in 0..n {
                for j in 0..n {
                    a[i * n + j] -= y[i] * y[j];
                }
            }
        }
        a
    }

    /// Eigengap of the targeted distribution: after `d` deflations the next
    /// component sits at index `d + q` of the original spectrum.
    pub fn target_eigengap(&self, q: usize) -> Result<f64> {
        self.truth.eigengap(self.deflation.len() + q)
    }

    /// Orthonormal basis of the subspace this (possibly deflated) sampler targets.
    pub fn target_basis(&self, q: usize) -> Result<TallMatrix> {
        let d = self.deflation.len();
        let (_, v) = self.truth.top_eigenpairs(d + q)?;
        let data = (0..v.nrows()).flat_map(|i| v.row(i)[d..].to_vec()).collect();
        TallMatrix::new(v.nrows(), q, data)
    }

    pub fn variance(&self) -> Result<VarianceReport> {
        variance_params(self)
    }

    fn base_draw(&self, rng: &mut ChaCha8Rng) -> SampleOp {
        let t = self.truth.as_ref();
        match (self.kind, t) {
            (SamplerKind::Exact, _) => SampleOp::from_terms(t.dim(), self.fixed_terms.to_vec()),
            (SamplerKind::Entrywise, _) => draw::draw_entrywise(t, rng),
            (SamplerKind::RectEntrywise, GroundTruth::RectTriplets(m)) => draw::draw_rect(m, rng),
            (SamplerKind::Trace, _) => draw::draw_trace(t, rng),
            (SamplerKind::TraceSymmetric, _) => draw::draw_trace_symmetric(t, rng),
            (SamplerKind::Subspace { m_keep }, GroundTruth::ProjectionSubspace(s)) => {
                draw::draw_subspace(s, rng, m_keep)
            }
            (SamplerKind::SubspaceSplit { m_keep }, GroundTruth::ProjectionSubspace(s)) => {
                draw::draw_subspace_split(s, rng, m_keep)
            }
            _ => unreachable!("kind and truth are checked in Sampler::new"),
        }
    }
}

impl SampleSource for Sampler {
    fn dim(&self) -> usize {
        self.truth.dim()
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> SampleOp {
        let mut op = self.base_draw(rng);
        if let Some(noise) = self.noise {
            let em = if noise.multiplicative_sd > 0.0 {
                noise.multiplicative_sd * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            let ea = if noise.additive_sd > 0.0 { noise.additive_sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
            for t in op.terms_mut() {
                t.scale = t.scale * (1.0 + em) + ea;
            }
        }
        for t in &self.deflation_terms {
            op.push(t.clone());
        }
        op
    }

    fn rank_condition_holds(&self) -> bool {
        if self.kind == SamplerKind::Exact && self.noise.is_none() {
            return true;
        }
        self.kind != SamplerKind::RectEntrywise && self.kind != SamplerKind::Exact && self.deflation.is_empty()
    }
}

/// `A = Σ λ_k u_k u_kᵀ` as fixed terms; for rectangular data the embedding
/// `Σ σ_k ((a_k;0)(0;b_k)ᵀ + (0;b_k)(a_k;0)ᵀ)`.
fn exact_terms(truth: &GroundTruth) -> Result<Vec<Term>> {
    let n = truth.dim();
    let terms: Vec<Term> = match truth {
        GroundTruth::Spectral(s) => s
            .eigenvalues()
            .iter()
            .enumerate()
            .filter(|(_, l)| **l != 0.0)
            .map(|(k, &l)| {
                let u = TermVector::dense(s.eigenvectors().column(k).into_inner());
                Term::new(l, u.clone(), u)
            })
            .collect(),
        GroundTruth::ProjectionSubspace(s) => (0..s.rank())
            .map(|k| {
                let u = TermVector::dense(s.basis().column(k).into_inner());
                Term::new(1.0, u.clone(), u)
            })
            .collect(),
        GroundTruth::RectTriplets(m) => {
            let (rows, cols) = (m.rows(), m.cols());
            let mut terms = Vec::new();
            for (sigma, a, b) in m.top_singular(rows.min(cols))? {
                if sigma <= 0.0 {
                    continue;
                }
                let mut left = vec![0.0; n];
                left[..rows].copy_from_slice(&a);
                let mut right = vec![0.0; n];
                right[rows..rows + cols].copy_from_slice(&b);
                let (l, r) = (TermVector::dense(left), TermVector::dense(right));
                terms.push(Term::new(sigma, l.clone(), r.clone()));
                terms.push(Term::new(sigma, r, l));
            }
            terms
        }
    };
    if terms.is_empty() {
        return Err(Error::Parameter("ground truth is the zero matrix".into()));
    }
    Ok(terms)
}

/// The variance parameters of the matching lemma, inflated for noise.
pub fn variance_params(sampler: &Sampler) -> Result<VarianceReport> {
    let truth = sampler.truth();
    let n = truth.dim() as f64;
    let fro_sq = truth.frobenius_sq();
    let tr = truth.trace();
    let mut small_dimension = false;
    let mut incoherence = None;
    let (a, r) = match (sampler.kind(), truth) {
        (SamplerKind::Exact, _) => {
            return Ok(VarianceReport {
                params: VarianceParams { sigma_a_sq: 0.0, sigma_r_sq: 0.0 },
                degenerate: true,
                small_dimension: false,
                deflated: !sampler.deflation().is_empty(),
                incoherence: None,
            });
        }
        (SamplerKind::Entrywise, t) => {
            let mu = match t {
                GroundTruth::Spectral(s) => matrix_incoherence(s),
                GroundTruth::ProjectionSubspace(s) => truth::basis_incoherence(s.basis()),
                GroundTruth::RectTriplets(_) => unreachable!(),
            };
            incoherence = Some(mu);
            let mu4 = mu.powi(4);
            (mu4 * fro_sq, mu4 * tr * tr)
        }
        (SamplerKind::RectEntrywise, GroundTruth::RectTriplets(m)) => {
            let xi = m.entry_bound();
            let v = 2.0 * xi * m.frobenius_sq();
            (v, v)
        }
        (SamplerKind::Trace | SamplerKind::TraceSymmetric, _) => {
            small_dimension = n <= 50.0;
            (16.0 * fro_sq, 16.0 * tr * tr)
        }
        (
            SamplerKind::Subspace { m_keep } | SamplerKind::SubspaceSplit { m_keep },
            GroundTruth::ProjectionSubspace(s),
        ) => {
            let mu = subspace_incoherence(s);
            incoherence = Some(mu);
            let rank = s.rank() as f64;
            let v = (rank * (1.0 + mu * rank / m_keep as f64)).powi(2);
            (v, v)
        }
        _ => unreachable!("kind and truth are checked in Sampler::new"),
    };
    let (a, r) = match sampler.noise() {
        Some(noise) => {
            let grow = 1.0 + noise.multiplicative_sd.powi(2);
            let add = n * n * noise.additive_sd.powi(2);
            (a * grow + add, r * grow + add)
        }
        None => (a, r),
    };
    Ok(VarianceReport {
        params: VarianceParams::new(a, r)?,
        degenerate: false,
        small_dimension,
        deflated: !sampler.deflation().is_empty(),
        incoherence,
    })
}
