use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{dot, TallMatrix};

/// One side of a rank-one term. Basis vectors are kept symbolic so that an
/// entrywise update touches a single row of the iterate.
#[derive(Clone, Debug, PartialEq)]
pub enum TermVector {
    Basis(usize),
    Dense(Arc<[f64]>),
}

impl TermVector {
    pub fn dense(values: Vec<f64>) -> Self {
        TermVector::Dense(values.into())
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        match self {
            TermVector::Basis(i) => x[*i],
            TermVector::Dense(v) => dot(v, x),
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        match self {
            TermVector::Basis(i) => {
                let mut v = vec![0.0; n];
                v[*i] = 1.0;
                v
            }
            TermVector::Dense(v) => v.to_vec(),
        }
    }

    /// Indices of the nonzero coordinates.
    pub fn support(&self) -> Vec<usize> {
        match self {
            TermVector::Basis(i) => vec![*i],
            TermVector::Dense(v) => (0..v.len()).filter(|&i| v[i] != 0.0).collect(),
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        match self {
            TermVector::Basis(i) if *i >= n => {
                Err(Error::Dimension(format!("basis index {i} out of range for dimension {n}")))
            }
            TermVector::Dense(v) if v.len() != n => {
                Err(Error::Dimension(format!("term vector of length {} in dimension {n}", v.len())))
            }
            _ => Ok(()),
        }
    }

    /// `selfᵀ Y`.
    fn transpose_mul(&self, y: &TallMatrix) -> Vec<f64> {
        match self {
            TermVector::Basis(i) => y.row(*i).to_vec(),
            TermVector::Dense(v) => y.transpose_mul_vec(v),
        }
    }

    /// `Y += factor · self wᵀ`, returning the largest magnitude written.
    fn add_outer(&self, y: &mut TallMatrix, w: &[f64], factor: f64) -> f64 {
        let mut largest: f64 = 0.0;
        let mut update_row = |row: &mut [f64], f: f64| {
            for (x, wk) in row.iter_mut().zip(w) {
                *x += f * wk;
                largest = largest.max(x.abs());
            }
        };
        match self {
            TermVector::Basis(i) => update_row(y.row_mut(*i), factor),
            TermVector::Dense(v) => {
                for (i, &vi) in v.iter().enumerate() {
                    if vi != 0.0 {
                        update_row(y.row_mut(i), factor * vi);
                    }
                }
            }
        }
        largest
    }
}

/// `scale · left rightᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub scale: f64,
    pub left: TermVector,
    pub right: TermVector,
}

impl Term {
    pub fn new(scale: f64, left: TermVector, right: TermVector) -> Self {
        Self { scale, left, right }
    }
}

/// One random measurement `Ã = Σ_t scale_t · left_t right_tᵀ` in dimension `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleOp {
    dim: usize,
    terms: Vec<Term>,
}

impl SampleOp {
    pub fn new(dim: usize, terms: Vec<Term>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Parameter("a sample needs at least one term".into()));
        }
        for t in &terms {
            t.left.check(dim)?;
            t.right.check(dim)?;
            if !t.scale.is_finite() {
                return Err(Error::Parameter("term scale is not finite".into()));
            }
        }
        Ok(Self { dim, terms })
    }

    pub(crate) fn from_terms(dim: usize, terms: Vec<Term>) -> Self {
        debug_assert!(!terms.is_empty());
        Self { dim, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub(crate) fn terms_mut(&mut self) -> &mut [Term] {
        &mut self.terms
    }

    pub(crate) fn push(&mut self, term: Term) {
        self.terms.push(term);
    }

    /// `Ã x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for t in &self.terms {
            let c = t.scale * t.right.dot(x);
            if c == 0.0 {
                continue;
            }
            match &t.left {
                TermVector::Basis(i) => out[*i] += c,
                TermVector::Dense(v) => {
                    for (o, vi) in out.iter_mut().zip(v.iter()) {
                        *o += c * vi;
                    }
                }
            }
        }
        out
    }

    /// `zᵀ Ã y`.
    pub fn bilinear(&self, z: &[f64], y: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.scale * t.left.dot(z) * t.right.dot(y)).sum()
    }

    /// `yᵀ Ã y`.
    pub fn quadratic(&self, y: &[f64]) -> f64 {
        self.bilinear(y, y)
    }

    /// `Y ← Y + η Ã Y`. All products `rightᵀY` are taken against the old
    /// iterate. Returns the largest magnitude among the entries written.
    pub fn step(&self, y: &mut TallMatrix, eta: f64) -> f64 {
        if let [t] = self.terms.as_slice() {
            if t.scale == 0.0 || eta == 0.0 {
                return 0.0;
            }
            let w = t.right.transpose_mul(y);
            return t.left.add_outer(y, &w, eta * t.scale);
        }
        let products: Vec<Vec<f64>> = self.terms.iter().map(|t| t.right.transpose_mul(y)).collect();
        let mut largest: f64 = 0.0;
        for (t, w) in self.terms.iter().zip(&products) {
            if t.scale != 0.0 && eta != 0.0 {
                largest = largest.max(t.left.add_outer(y, w, eta * t.scale));
            }
        }
        largest
    }

    /// `acc += Ŷᵀ Ã Ŷ` with `acc` a row-major `p × p` buffer.
    pub fn accumulate_projection(&self, yhat: &TallMatrix, acc: &mut [f64]) {
        let p = yhat.ncols();
        for t in &self.terms {
            if t.scale == 0.0 {
                continue;
            }
            let a = t.left.transpose_mul(yhat);
            let b = t.right.transpose_mul(yhat);
            for r in 0..p {
                let f = t.scale * a[r];
                for c in 0..p {
                    acc[r * p + c] += f * b[c];
                }
            }
        }
    }

    /// Dense row-major `n × n` form; only for small test problems.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for t in &self.terms {
            let l = t.left.to_dense(n);
            let r = t.right.to_dense(n);
            for i in 0..n {
                if l[i] != 0.0 {
                    for j in 0..n {
                        out[i * n + j] += t.scale * l[i] * r[j];
                    }
                }
            }
        }
        out
    }
}
