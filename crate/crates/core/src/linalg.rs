//! Dense linear algebra sized for Alecton: length-`n` vectors, `n × p`
//! iterates stored row-major, and `p × p` symmetric routines built on a
//! cyclic Jacobi eigensolver.
//!
//! Nothing here ever forms an `n × n` matrix. Large operators only reach an
//! iterate through [`apply_outer`] style rank-one updates.

use std::ops::Deref;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Largest dimension accepted by the small symmetric routines.
pub const MAX_SMALL_DIM: usize = 64;

const JACOBI_TOLERANCE: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const RANK_TOLERANCE: f64 = 1e-12;

/// A finite real vector of fixed length.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Dimension("vector must have at least one entry".into()));
        }
        if let Some(i) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::Parameter(format!("vector entry {i} is not finite")));
        }
        Ok(Self(entries))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// The standard basis vector `e_index` in dimension `n`.
    pub fn basis(n: usize, index: usize) -> Self {
        let mut v = vec![0.0; n];
        v[index] = 1.0;
        Self(v)
    }

    /// A direction drawn uniformly from the unit sphere (normalized Gaussian).
    pub fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        loop {
            let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = norm(&v);
            if norm > 1e-300 {
                return Self(v.into_iter().map(|x| x / norm).collect());
            }
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|x| x * factor).collect())
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// An `n × p` real matrix with `n ≥ p ≥ 1`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TallMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TallMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 || rows < cols {
            return Err(Error::Dimension(format!(
                "tall matrix needs rows >= cols >= 1, got {rows} x {cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} entries for {rows} x {cols}, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        debug_assert!(cols >= 1 && rows >= cols);
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_columns(columns: &[Vector]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Dimension("columns have differing lengths".into()));
        }
        let mut data = vec![0.0; rows * cols];
        for (j, c) in columns.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                data[i * cols + j] = x;
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector((0..self.rows).map(|i| self.get(i, j)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[allow(dead_code)]
    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    /// `selfᵀ v` as a length-`p` vector.
    pub fn transpose_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                for (o, y) in out.iter_mut().zip(self.row(i)) {
                    *o += vi * y;
                }
            }
        }
        out
    }

    /// `self · w` for a length-`p` coefficient vector.
    pub fn mul_vec(&self, w: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), w)).collect()
    }

    /// `selfᵀ other`, returned row-major with shape `self.ncols() × other.ncols()`.
    pub fn cross(&self, other: &TallMatrix) -> Result<Vec<f64>> {
        if self.rows != other.rows {
            return Err(Error::Dimension(format!(
                "cross product of {}-row and {}-row matrices",
                self.rows, other.rows
            )));
        }
        let (a, b) = (self.cols, other.cols);
        let mut out = vec![0.0; a * b];
        for i in 0..self.rows {
            let (ri, si) = (self.row(i), other.row(i));
            for (r, &x) in ri.iter().enumerate() {
                for (c, &y) in si.iter().enumerate() {
                    out[r * b + c] += x * y;
                }
            }
        }
        Ok(out)
    }

    /// Right-multiplication by a `p × p` symmetric matrix.
    pub fn mul_small(&self, s: &SmallSymmetric) -> Result<TallMatrix> {
        if s.dim() != self.cols {
            return Err(Error::Dimension(format!(
                "cannot multiply {} columns by a {}x{} matrix",
                self.cols,
                s.dim(),
                s.dim()
            )));
        }
        let p = self.cols;
        let mut data = vec![0.0; self.rows * p];
        for i in 0..self.rows {
            let row = self.row(i);
            for c in 0..p {
                data[i * p + c] = (0..p).map(|k| row[k] * s.get(k, c)).sum();
            }
        }
        Ok(TallMatrix { rows: self.rows, cols: p, data })
    }

    /// `Y (YᵀY)^{-1/2}`: orthonormal columns spanning the same space.
    pub fn orthonormalized(&self) -> Result<TallMatrix> {
        self.mul_small(&inv_sqrt_psd(&gram(self))?)
    }

    pub(crate) fn scale_in_place(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }
}

/// A `p × p` symmetric matrix. Construction symmetrizes by averaging with the transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct SmallSymmetric {
    dim: usize,
    data: Vec<f64>,
}

impl SmallSymmetric {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > MAX_SMALL_DIM {
            return Err(Error::Dimension(format!(
                "small symmetric dimension must be in 1..={MAX_SMALL_DIM}, got {dim}"
            )));
        }
        if data.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "expected {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("matrix entries must be finite".into()));
        }
        Ok(Self::symmetrized(dim, data))
    }

    pub(crate) fn symmetrized(dim: usize, mut data: Vec<f64>) -> Self {
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (data[i * dim + j] + data[j * dim + i]);
                data[i * dim + j] = avg;
                data[j * dim + i] = avg;
            }
        }
        Self { dim, data }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let dim = values.len();
        let mut data = vec![0.0; dim * dim];
        for (i, &v) in values.iter().enumerate() {
            data[i * dim + i] = v;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius(&self) -> f64 {
        norm(&self.data)
    }

    /// Entrywise `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &SmallSymmetric, b: f64) -> SmallSymmetric {
        debug_assert_eq!(self.dim, other.dim);
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        SmallSymmetric { dim: self.dim, data }
    }

    /// `Mᵀ self M` for a symmetric `M` of the same size.
    pub fn congruence(&self, m: &SmallSymmetric) -> SmallSymmetric {
        let p = self.dim;
        let mut tmp = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                tmp[i * p + j] = (0..p).map(|k| self.get(i, k) * m.get(k, j)).sum();
            }
        }
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                out[i * p + j] = (0..p).map(|k| m.get(k, i) * tmp[k * p + j]).sum();
            }
        }
        Self::symmetrized(p, out)
    }

    pub fn eigen(&self) -> Result<SymmetricEigen> {
        jacobi_eigen(self)
    }
}

/// Eigen-decomposition with eigenvalues in descending order; column `k` of
/// `vectors` (row-major, `dim × dim`) pairs with `values[k]`.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

impl SymmetricEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        let p = self.dim();
        (0..p).map(|i| self.vectors[i * p + k]).collect()
    }

    /// `V f(Λ) Vᵀ`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> SmallSymmetric {
        let p = self.dim();
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut data = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                data[i * p + j] = (0..p)
                    .map(|k| self.vectors[i * p + k] * mapped[k] * self.vectors[j * p + k])
                    .sum();
            }
        }
        SmallSymmetric::symmetrized(p, data)
    }
}

fn jacobi_eigen(s: &SmallSymmetric) -> Result<SymmetricEigen> {
    let n = s.dim;
    let mut a = s.data.clone();
    let mut v = SmallSymmetric::identity(n).data;
    let scale = norm(&a);

    let off_norm = |a: &[f64]| -> f64 {
        let mut sum = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                sum += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        sum.sqrt()
    };

    let mut sweeps = 0;
    while scale > 0.0 {
        if off_norm(&a) <= JACOBI_TOLERANCE * scale {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off_norm: off_norm(&a) });
        }
        sweeps += 1;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - sn * akq;
                    a[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - sn * aqk;
                    a[q * n + k] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&k| a[k * n + k]).collect();
    let mut vectors = vec![0.0; n * n];
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + dst] = v[i * n + src];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// A random `n × p` matrix with orthonormal columns, distributed uniformly
/// (orthonormalized standard Gaussian, with a re-orthogonalization pass).
pub fn random_orthonormal<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<TallMatrix> {
    if p == 0 || p > n {
        return Err(Error::Dimension(format!("need 1 <= p <= n, got n={n}, p={p}")));
    }
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(p);
    while columns.len() < p {
        let mut c: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let initial = norm(&c);
        for _ in 0..2 {
            for q in &columns {
                let proj = dot(q, &c);
                for (x, y) in c.iter_mut().zip(q) {
                    *x -= proj * y;
                }
            }
        }
        let remaining = norm(&c);
        // a draw almost inside the current span is redrawn
        if remaining <= 1e-10 * initial {
            continue;
        }
        c.iter_mut().for_each(|x| *x /= remaining);
        columns.push(c);
    }
    let mut data = vec![0.0; n * p];
    for (j, c) in columns.iter().enumerate() {
        for (i, &x) in c.iter().enumerate() {
            data[i * p + j] = x;
        }
    }
    Ok(TallMatrix { rows: n, cols: p, data })
}

/// `YᵀY`.
pub fn gram(y: &TallMatrix) -> SmallSymmetric {
    let p = y.cols;
    let mut data = vec![0.0; p * p];
    for i in 0..y.rows {
        let row = y.row(i);
        for a in 0..p {
            for b in a..p {
                data[a * p + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            data[a * p + b] = data[b * p + a];
        }
    }
    SmallSymmetric { dim: p, data }
}

/// `S^{-1/2}` for a positive definite `S`. Fails loudly when the smallest
/// eigenvalue is below `1e-12` of the largest.
pub fn inv_sqrt_psd(s: &SmallSymmetric) -> Result<SmallSymmetric> {
    let eig = s.eigen()?;
    let largest = eig.values[0];
    let smallest = *eig.values.last().expect("dimension >= 1");
    if largest <= 0.0 || smallest <= RANK_TOLERANCE * largest {
        return Err(Error::RankDeficient { eigenvalue: smallest, largest });
    }
    Ok(eig.map_values(|l| 1.0 / l.sqrt()))
}

/// Eigenvalues in descending order.
pub fn small_eigs(s: &SmallSymmetric) -> Result<Vec<f64>> {
    Ok(s.eigen()?.values)
}

/// Determinant by partial-pivoted elimination.
pub fn det_small(s: &SmallSymmetric) -> f64 {
    let n = s.dim;
    if n == 1 {
        return s.data[0];
    }
    let mut a = s.data.clone();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .expect("non-empty range");
        if a[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            det = -det;
        }
        let d = a[col * n + col];
        det *= d;
        for r in (col + 1)..n {
            let f = a[r * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
            }
        }
    }
    det
}

/// `Y ← Y + scale · u (vᵀ Y)` in `O(np)`.
pub fn apply_outer(y: &mut TallMatrix, scale: f64, u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != y.rows || v.len() != y.rows {
        return Err(Error::Dimension(format!(
            "outer product vectors of length {} and {} applied to {} rows",
            u.len(),
            v.len(),
            y.rows
        )));
    }
    if scale == 0.0 {
        return Ok(());
    }
    let w = y.transpose_mul_vec(v);
    for (i, &ui) in u.iter().enumerate() {
        if ui != 0.0 {
            let f = scale * ui;
            for (x, wk) in y.row_mut(i).iter_mut().zip(&w) {
                *x += f * wk;
            }
        }
    }
    Ok(())
}

/// Sine of the largest principal angle between the column spaces of `a` and
/// `b` (equal column counts). Zero when the spaces coincide.
pub fn subspace_distance(a: &TallMatrix, b: &TallMatrix) -> Result<f64> {
    if a.cols != b.cols {
        return Err(Error::Dimension("subspaces of different dimension".into()));
    }
    let qa = a.orthonormalized()?;
    let qb = b.orthonormalized()?;
    let c = qa.cross(&qb)?;
    let p = a.cols;
    // sin θ_max = ‖(I − QaQaᵀ)Qb‖₂, which stays accurate for tiny angles
    let mut residual = qb.clone();
    for i in 0..residual.rows {
        let qa_row = qa.row(i);
        let row = residual.row_mut(i);
        for (col, x) in row.iter_mut().enumerate() {
            *x -= (0..p).map(|k| qa_row[k] * c[k * p + col]).sum::<f64>();
        }
    }
    let largest = small_eigs(&gram(&residual))?[0];
    Ok(largest.clamp(0.0, 1.0).sqrt())
}
