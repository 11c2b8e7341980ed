//! Target matrices `A = E[Ã]` in the three forms the samplers consume.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, dot, SmallSymmetric, TallMatrix, Vector, MAX_SMALL_DIM};

const ORTHONORMAL_TOLERANCE: f64 = 1e-10;

/// Largest `rows × cols` grid a triplet store will allocate.
pub const MAX_TRIPLET_CELLS: usize = 10_000_000;

fn check_orthonormal(basis: &TallMatrix) -> Result<()> {
    let g = linalg::gram(basis);
    for i in 0..g.dim() {
        for j in 0..g.dim() {
            let want = if i == j { 1.0 } else { 0.0 };
            if (g.get(i, j) - want).abs() > ORTHONORMAL_TOLERANCE {
                return Err(Error::Parameter(format!(
                    "basis is not orthonormal: gram({i},{j}) = {}",
                    g.get(i, j)
                )));
            }
        }
    }
    Ok(())
}

/// `A = Σ_k λ_k u_k u_kᵀ` over the stored eigenpairs; any remaining
/// eigenvalues are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralTruth {
    eigenvalues: Vec<f64>,
    eigenvectors: TallMatrix,
}

impl SpectralTruth {
    pub fn new(eigenvalues: Vec<f64>, eigenvectors: TallMatrix) -> Result<Self> {
        if eigenvalues.len() != eigenvectors.ncols() {
            return Err(Error::Dimension(format!(
                "{} eigenvalues for {} eigenvectors",
                eigenvalues.len(),
                eigenvectors.ncols()
            )));
        }
        if eigenvalues.iter().any(|l| !l.is_finite()) {
            return Err(Error::Parameter("eigenvalues must be finite".into()));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Parameter("eigenvalues must be sorted descending".into()));
        }
        if eigenvalues.len() < eigenvectors.nrows() && eigenvalues.iter().any(|&l| l < 0.0) {
            return Err(Error::Parameter(
                "a partial spectrum must be nonnegative (unlisted eigenvalues are zero)".into(),
            ));
        }
        check_orthonormal(&eigenvectors)?;
        Ok(Self { eigenvalues, eigenvectors })
    }

    /// `diag(values)` with standard-basis eigenvectors, in any input order.
    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let mut vectors = vec![0.0; n * n];
        for (k, &i) in order.iter().enumerate() {
            vectors[i * n + k] = 1.0;
        }
        Self::new(order.iter().map(|&i| values[i]).collect(), TallMatrix::new(n, n, vectors)?)
    }

    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &TallMatrix {
        &self.eigenvectors
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (ri, rj) = (self.eigenvectors.row(i), self.eigenvectors.row(j));
        self.eigenvalues.iter().zip(ri.iter().zip(rj)).map(|(l, (a, b))| l * a * b).sum()
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let mut coeffs = self.eigenvectors.transpose_mul_vec(v);
        for (c, l) in coeffs.iter_mut().zip(&self.eigenvalues) {
            *c *= l;
        }
        self.eigenvectors.mul_vec(&coeffs)
    }

    pub fn bilinear(&self, v: &[f64], w: &[f64]) -> f64 {
        let a = self.eigenvectors.transpose_mul_vec(v);
        let b = self.eigenvectors.transpose_mul_vec(w);
        self.eigenvalues.iter().zip(a.iter().zip(&b)).map(|(l, (x, y))| l * x * y).sum()
    }
}

/// A rank-`r` orthogonal projector `A = B Bᵀ` given by an orthonormal basis `B`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceTruth {
    basis: TallMatrix,
}

impl SubspaceTruth {
    pub fn new(basis: TallMatrix) -> Result<Self> {
        check_orthonormal(&basis)?;
        Ok(Self { basis })
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &TallMatrix {
        &self.basis
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        dot(self.basis.row(i), self.basis.row(j))
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        self.basis.mul_vec(&self.basis.transpose_mul_vec(v))
    }
}

/// A rectangular `m × n` matrix ingested as `(row, col, value)` entries over a
/// dense value grid. Unlisted cells are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct TripletMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    observed: Vec<bool>,
    count: usize,
}

impl TripletMatrix {
    /// Later entries for the same cell overwrite earlier ones.
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("triplet matrix needs positive dimensions".into()));
        }
        let cells = rows
            .checked_mul(cols)
            .filter(|&c| c <= MAX_TRIPLET_CELLS)
            .ok_or_else(|| Error::Dimension(format!("{rows} x {cols} exceeds {MAX_TRIPLET_CELLS} cells")))?;
        let mut values = vec![0.0; cells];
        let mut observed = vec![false; cells];
        let mut count = 0;
        for (i, j, v) in entries {
            if i >= rows || j >= cols {
                return Err(Error::Dimension(format!("entry ({i},{j}) outside {rows} x {cols}")));
            }
            if !v.is_finite() {
                return Err(Error::Parameter(format!("entry ({i},{j}) is not finite")));
            }
            let k = i * cols + j;
            if !observed[k] {
                observed[k] = true;
                count += 1;
            }
            values[k] = v;
        }
        Ok(Self { rows, cols, values, observed, count })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of distinct stored cells.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn observed(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.observed
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(move |(k, _)| (k / self.cols, k % self.cols, self.values[k]))
    }

    pub fn frobenius_sq(&self) -> f64 {
        dot(&self.values, &self.values)
    }

    /// Smallest `ξ` with `M_ij² ≤ ξ ‖M‖_F² / (mn)` for every cell.
    pub fn entry_bound(&self) -> f64 {
        let fro = self.frobenius_sq();
        if fro == 0.0 {
            return 0.0;
        }
        let max_sq = self.values.iter().fold(0.0_f64, |m, v| m.max(v * v));
        max_sq * (self.rows * self.cols) as f64 / fro
    }

    /// `M x` for `x` of length `cols`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(&self.values[i * self.cols..(i + 1) * self.cols], x)).collect()
    }

    /// `Mᵀ x` for `x` of length `rows`.
    pub fn mul_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (o, v) in out.iter_mut().zip(&self.values[i * self.cols..(i + 1) * self.cols]) {
                    *o += xi * v;
                }
            }
        }
        out
    }

    /// Leading `k` singular triplets `(σ, left, right)` by block subspace
    /// iteration on `MᵀM` with a Rayleigh–Ritz step each sweep.
    pub fn top_singular(&self, k: usize) -> Result<Vec<(f64, Vec<f64>, Vec<f64>)>> {
        let k = k.min(self.rows.min(self.cols));
        if k == 0 {
            return Ok(Vec::new());
        }
        let block = (k + 4).min(self.cols).min(MAX_SMALL_DIM);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut x: Vec<Vec<f64>> = (0..block).map(|_| Vector::random_unit(self.cols, &mut rng).into_inner()).collect();
        orthonormalize_columns(&mut x, &mut rng);
        let mut previous = vec![f64::INFINITY; block];
        let scale = self.frobenius_sq().max(f64::MIN_POSITIVE);
        for _ in 0..20_000 {
            let mut z: Vec<Vec<f64>> = x.iter().map(|c| self.mul_transpose(&self.mul(c))).collect();
            orthonormalize_columns(&mut z, &mut rng);
            let mz: Vec<Vec<f64>> = z.iter().map(|c| self.mul(c)).collect();
            let mut t = vec![0.0; block * block];
            for a in 0..block {
                for b in 0..block {
                    t[a * block + b] = dot(&mz[a], &mz[b]);
                }
            }
            let eig = SmallSymmetric::symmetrized(block, t).eigen()?;
            x = (0..block)
                .map(|c| {
                    let mut col = vec![0.0; self.cols];
                    for (m, zm) in z.iter().enumerate() {
                        let f = eig.vectors[m * block + c];
                        for (o, v) in col.iter_mut().zip(zm) {
                            *o += f * v;
                        }
                    }
                    col
                })
                .collect();
            let change = eig.values[..k]
                .iter()
                .zip(&previous[..k])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            previous = eig.values;
            if change <= 1e-14 * scale {
                break;
            }
        }
        let mut out = Vec::with_capacity(k);
        for right in x.into_iter().take(k) {
            let mut left = self.mul(&right);
            let sigma = linalg::norm(&left);
            if sigma > 0.0 {
                left.iter_mut().for_each(|v| *v /= sigma);
            }
            out.push((sigma, left, right));
        }
        Ok(out)
    }
}

/// Modified Gram–Schmidt (two passes); columns that collapse are replaced by
/// fresh random directions so the block keeps full rank.
fn orthonormalize_columns(cols: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    for c in 0..cols.len() {
        loop {
            let initial = linalg::norm(&cols[c]);
            for _ in 0..2 {
                for q in 0..c {
                    let proj = dot(&cols[q], &cols[c]);
                    let (done, rest) = cols.split_at_mut(c);
                    for (x, y) in rest[0].iter_mut().zip(&done[q]) {
                        *x -= proj * y;
                    }
                }
            }
            let remaining = linalg::norm(&cols[c]);
            if initial > 0.0 && remaining > 1e-10 * initial {
                cols[c].iter_mut().for_each(|x| *x /= remaining);
                break;
            }
            let n = cols[c].len();
            cols[c] = Vector::random_unit(n, rng).into_inner();
        }
    }
}

/// The expected sample `A`, in spectral, rectangular-triplet, or projection form.
///
/// Rectangular data is seen through its symmetric embedding
/// `[[0, M], [Mᵀ, 0]]` of dimension `m + n`.
#[derive(Clone, Debug, PartialEq)]
pub enum GroundTruth {
    Spectral(SpectralTruth),
    RectTriplets(TripletMatrix),
    ProjectionSubspace(SubspaceTruth),
}

impl GroundTruth {
    pub fn dim(&self) -> usize {
        match self {
            GroundTruth::Spectral(s) => s.dim(),
            GroundTruth::RectTriplets(t) => t.rows + t.cols,
            GroundTruth::ProjectionSubspace(s) => s.dim(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            GroundTruth::Spectral(s) => s.entry(i, j),
            GroundTruth::ProjectionSubspace(s) => s.entry(i, j),
            GroundTruth::RectTriplets(t) => {
                let m = t.rows;
                match (i < m, j < m) {
                    (true, false) => t.get(i, j - m),
                    (false, true) => t.get(j, i - m),
                    _ => 0.0,
                }
            }
        }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        match self {
            GroundTruth::Spectral(s) => s.matvec(v),
            GroundTruth::ProjectionSubspace(s) => s.matvec(v),
            GroundTruth::RectTriplets(t) => {
                let (top, bottom) = v.split_at(t.rows);
                let mut out = t.mul(bottom);
                out.extend(t.mul_transpose(top));
                out
            }
        }
    }

    pub fn bilinear(&self, v: &[f64], w: &[f64]) -> f64 {
        match self {
            GroundTruth::Spectral(s) => s.bilinear(v, w),
            _ => dot(v, &self.matvec(w)),
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        match self {
            GroundTruth::Spectral(s) => s.eigenvalues.iter().map(|l| l * l).sum(),
            GroundTruth::ProjectionSubspace(s) => s.rank() as f64,
            GroundTruth::RectTriplets(t) => 2.0 * t.frobenius_sq(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            GroundTruth::Spectral(s) => s.eigenvalues.iter().sum(),
            GroundTruth::ProjectionSubspace(s) => s.rank() as f64,
            GroundTruth::RectTriplets(_) => 0.0,
        }
    }

    /// Dense row-major `n × n` form of `A`; intended for small checks.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.entry(i, j);
            }
        }
        out
    }

    /// The leading `k` eigenpairs (descending), eigenvectors as columns.
    pub fn top_eigenpairs(&self, k: usize) -> Result<(Vec<f64>, TallMatrix)> {
        let n = self.dim();
        if k == 0 || k > n {
            return Err(Error::Dimension(format!("cannot take {k} eigenpairs in dimension {n}")));
        }
        match self {
            GroundTruth::Spectral(s) => {
                if k > s.rank() {
                    return Err(Error::Dimension(format!(
                        "only {} eigenvectors are stored, {k} requested",
                        s.rank()
                    )));
                }
                let v = s.eigenvectors();
                let data = (0..n).flat_map(|i| v.row(i)[..k].to_vec()).collect();
                Ok((s.eigenvalues[..k].to_vec(), TallMatrix::new(n, k, data)?))
            }
            GroundTruth::ProjectionSubspace(s) => {
                if k > s.rank() {
                    return Err(Error::Dimension(format!(
                        "projector has rank {}, {k} eigenvectors requested",
                        s.rank()
                    )));
                }
                let b = s.basis();
                let data = (0..n).flat_map(|i| b.row(i)[..k].to_vec()).collect();
                Ok((vec![1.0; k], TallMatrix::new(n, k, data)?))
            }
            GroundTruth::RectTriplets(t) => {
                let triplets = t.top_singular(k)?;
                if triplets.len() < k {
                    return Err(Error::Dimension(format!("only {} singular pairs exist", triplets.len())));
                }
                let mut data = vec![0.0; n * k];
                let h = std::f64::consts::FRAC_1_SQRT_2;
                for (c, (_, left, right)) in triplets.iter().enumerate() {
                    for (i, v) in left.iter().chain(right).enumerate() {
                        data[i * k + c] = h * v;
                    }
                }
                Ok((triplets.iter().map(|t| t.0).collect(), TallMatrix::new(n, k, data)?))
            }
        }
    }

    /// `λ_k` (1-based) of the symmetric form, counting implicit zeros.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        let n = self.dim();
        if k == 0 || k > n {
            return Err(Error::Dimension(format!("eigenvalue index {k} outside 1..={n}")));
        }
        Ok(match self {
            GroundTruth::Spectral(s) => s.eigenvalues.get(k - 1).copied().unwrap_or(0.0),
            GroundTruth::ProjectionSubspace(s) => {
                if k <= s.rank() {
                    1.0
                } else {
                    0.0
                }
            }
            GroundTruth::RectTriplets(t) => {
                let sv = t.top_singular(k)?;
                sv.get(k - 1).map_or(0.0, |s| s.0)
            }
        })
    }

    /// `Δ = λ_q − λ_{q+1}` (with `λ_{n+1} = 0`), rejecting a nonpositive gap.
    pub fn eigengap(&self, q: usize) -> Result<f64> {
        let n = self.dim();
        if q == 0 || q > n {
            return Err(Error::Dimension(format!("eigengap needs 1 <= q <= n = {n}, got {q}")));
        }
        let delta = match self {
            GroundTruth::RectTriplets(t) => {
                let sv = t.top_singular(q + 1)?;
                let at = |k: usize| sv.get(k).map_or(0.0, |s| s.0);
                at(q - 1) - at(q)
            }
            _ if q == n => self.eigenvalue(q)?,
            _ => self.eigenvalue(q)? - self.eigenvalue(q + 1)?,
        };
        if delta <= 0.0 {
            return Err(Error::DegenerateEigengap(delta));
        }
        Ok(delta)
    }

    /// Orthonormal basis of the top-`q` eigenspace (the projector `U`).
    pub fn dominant_basis(&self, q: usize) -> Result<TallMatrix> {
        Ok(self.top_eigenpairs(q)?.1)
    }
}

/// `μ = √n · max |e_jᵀ u_i|` over eigenvectors with nonzero eigenvalue.
pub fn matrix_incoherence(truth: &SpectralTruth) -> f64 {
    let v = truth.eigenvectors();
    let mut largest: f64 = 0.0;
    for i in 0..v.nrows() {
        for (k, &l) in truth.eigenvalues().iter().enumerate() {
            if l != 0.0 {
                largest = largest.max(v.get(i, k).abs());
            }
        }
    }
    (truth.dim() as f64).sqrt() * largest
}

/// `μ = (n / r) · max_i ‖U e_i‖²`.
pub fn subspace_incoherence(truth: &SubspaceTruth) -> f64 {
    let b = truth.basis();
    let largest = (0..b.nrows()).map(|i| dot(b.row(i), b.row(i))).fold(0.0, f64::max);
    truth.dim() as f64 / truth.rank() as f64 * largest
}

pub(crate) fn basis_incoherence(basis: &TallMatrix) -> f64 {
    (basis.nrows() as f64).sqrt() * basis.max_abs()
}
