//! Dense row-major matrices and the handful of factorizations the search
//! needs: a thin SVD (one-sided Jacobi), pseudoinverses, orthonormal
//! complements and projectors.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::math;

/// Dense real matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(alloc::format!(
                "matrix {}x{} needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch(alloc::format!(
                    "row {} has length {}, expected {}",
                    i,
                    row.len(),
                    cols
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Rank-one matrix `u vᵀ`.
    pub fn outer(u: &[f64], v: &[f64]) -> Self {
        let mut m = Self::zeros(u.len(), v.len());
        for (i, ui) in u.iter().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                m[(i, j)] = ui * vj;
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(alloc::format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                rhs.rows,
                rhs.cols
            )));
        }
        Ok(self.mul_unchecked(rhs))
    }

    pub(crate) fn mul_unchecked(&self, rhs: &Matrix) -> Self {
        debug_assert_eq!(self.cols, rhs.rows);
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · rhsᵀ` without materializing the transpose.
    pub(crate) fn mul_transpose(&self, rhs: &Matrix) -> Self {
        debug_assert_eq!(self.cols, rhs.cols);
        let mut out = Self::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..rhs.rows {
                out.data[i * rhs.rows + j] = dot(a, rhs.row(j));
            }
        }
        out
    }

    /// Gram matrix `M Mᵀ`.
    pub fn gram(&self) -> Self {
        self.mul_transpose(self)
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `Mᵀ x`.
    pub fn transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, xr) in x.iter().enumerate() {
            axpy_slice(&mut out, *xr, self.row(r));
        }
        out
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Self> {
        self.check_same(rhs)?;
        let mut out = self.clone();
        axpy_slice(&mut out.data, 1.0, &rhs.data);
        Ok(out)
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Self> {
        self.check_same(rhs)?;
        let mut out = self.clone();
        axpy_slice(&mut out.data, -1.0, &rhs.data);
        Ok(out)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= alpha);
        out
    }

    /// `self += alpha · rhs`.
    pub fn axpy(&mut self, alpha: f64, rhs: &Matrix) {
        debug_assert_eq!(self.shape(), rhs.shape());
        axpy_slice(&mut self.data, alpha, &rhs.data);
    }

    pub fn inner(&self, rhs: &Matrix) -> Result<f64> {
        self.check_same(rhs)?;
        Ok(dot(&self.data, &rhs.data))
    }

    pub fn norm_f(&self) -> f64 {
        norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        self.svd().s.first().copied().unwrap_or(0.0)
    }

    /// Kronecker product. Row index of `P ⊗ Q` is `a·rows(Q) + c`, column
    /// index `b·cols(Q) + d`, entry `P[a,b]·Q[c,d]`; this is the order used by
    /// [`crate::tensor::Tensor3::flatten`].
    pub fn kron(&self, rhs: &Matrix) -> Self {
        let rows = self.rows * rhs.rows;
        let cols = self.cols * rhs.cols;
        let mut out = Self::zeros(rows, cols);
        for a in 0..self.rows {
            for b in 0..self.cols {
                let p = self[(a, b)];
                for c in 0..rhs.rows {
                    for d in 0..rhs.cols {
                        out[(a * rhs.rows + c, b * rhs.cols + d)] = p * rhs[(c, d)];
                    }
                }
            }
        }
        out
    }

    fn check_same(&self, rhs: &Matrix) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{}x{} vs {}x{}",
                self.rows,
                self.cols,
                rhs.rows,
                rhs.cols
            )));
        }
        Ok(())
    }

    /// Thin singular value decomposition, see [`Svd`].
    pub fn svd(&self) -> Svd {
        Svd::compute(self)
    }

    /// Moore–Penrose pseudoinverse; singular values at or below
    /// `rel_cutoff · σ_max` are treated as zero.
    pub fn pinv(&self, rel_cutoff: f64) -> Self {
        let svd = self.svd();
        let smax = svd.s.first().copied().unwrap_or(0.0);
        let mut out = Self::zeros(self.cols, self.rows);
        for (k, &s) in svd.s.iter().enumerate() {
            if s <= rel_cutoff * smax || s == 0.0 {
                continue;
            }
            for i in 0..self.cols {
                let vi = svd.v[(i, k)] / s;
                if vi == 0.0 {
                    continue;
                }
                for j in 0..self.rows {
                    out[(i, j)] += vi * svd.u[(j, k)];
                }
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Thin SVD `M = U · diag(s) · Vᵀ` with `k = min(rows, cols)` components.
///
/// `u` is `rows × k`, `v` is `cols × k`, both with orthonormal columns, and
/// `s` is sorted in decreasing order. Columns belonging to zero singular
/// values are completed to an orthonormal set so `u` and `v` are always
/// orthonormal. Each left singular vector has its first nonzero coordinate
/// positive; the right vector is flipped to match.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

const JACOBI_MAX_SWEEPS: usize = 80;

impl Svd {
    fn compute(m: &Matrix) -> Self {
        if m.rows >= m.cols {
            let (u, s, v) = one_sided_jacobi(m);
            let mut svd = Svd { u, s, v };
            svd.canonicalize();
            svd
        } else {
            let (v, s, u) = one_sided_jacobi(&m.transpose());
            let mut svd = Svd { u, s, v };
            svd.canonicalize();
            svd
        }
    }

    /// Number of singular values strictly greater than `threshold`.
    pub fn rank_above(&self, threshold: f64) -> usize {
        self.s.iter().filter(|&&s| s > threshold).count()
    }

    fn canonicalize(&mut self) {
        let k = self.s.len();
        for c in 0..k {
            let col = self.u.col(c);
            let scale = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let first = col.iter().copied().find(|x| x.abs() > 1e-12 * scale);
            if matches!(first, Some(x) if x < 0.0) {
                for r in 0..self.u.rows {
                    self.u[(r, c)] = -self.u[(r, c)];
                }
                for r in 0..self.v.rows {
                    self.v[(r, c)] = -self.v[(r, c)];
                }
            }
        }
    }
}

/// Hestenes one-sided Jacobi on a tall matrix (`rows ≥ cols`). Returns
/// `(U, s, V)` with `U` tall-thin.
fn one_sided_jacobi(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (rows, n) = m.shape();
    // Work on columns stored contiguously.
    let mut g: Vec<Vec<f64>> = (0..n).map(|c| m.col(c)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            e
        })
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&g[p], &g[p]);
                let beta = dot(&g[q], &g[q]);
                let gamma = dot(&g[p], &g[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * math::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + math::sqrt(1.0 + zeta * zeta));
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = c * t;
                rotate_pair(&mut g, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = g.iter().map(|col| norm(col)).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let smax = norms.iter().fold(0.0f64, |m, &x| m.max(x));
    let tiny = smax * 1e-300_f64.max(f64::EPSILON * 1e-3);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut v_cols = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (slot, &idx) in order.iter().enumerate() {
        let sv = norms[idx];
        if sv > tiny && sv > 0.0 {
            u_cols.push(g[idx].iter().map(|x| x / sv).collect());
            s.push(sv);
        } else {
            u_cols.push(vec![0.0; rows]);
            s.push(0.0);
            missing.push(slot);
        }
        v_cols.push(v[idx].clone());
    }
    if !missing.is_empty() {
        let present: Vec<Vec<f64>> = u_cols
            .iter()
            .enumerate()
            .filter(|(i, _)| !missing.contains(i))
            .map(|(_, c)| c.clone())
            .collect();
        let fill = orthonormal_complement_vecs(&present, rows);
        for (slot, col) in missing.iter().zip(fill) {
            u_cols[*slot] = col;
        }
    }

    (cols_to_matrix(&u_cols, rows), s, cols_to_matrix(&v_cols, n))
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let xp = &mut left[p];
    let xq = &mut right[0];
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let ap = *a;
        let bq = *b;
        *a = c * ap - s * bq;
        *b = s * ap + c * bq;
    }
}

fn cols_to_matrix(cols: &[Vec<f64>], rows: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols.len());
    for (c, col) in cols.iter().enumerate() {
        for (r, x) in col.iter().enumerate() {
            m[(r, c)] = *x;
        }
    }
    m
}

/// Orthonormal basis of the orthogonal complement of the span of `basis`
/// (assumed orthonormal) in `ℝⁿ`, returned as vectors.
///
/// Pivoted Gram–Schmidt over the standard basis: at each step the candidate
/// with the largest residual is taken, which keeps the residual norm at least
/// `1/√n` and avoids cancellation.
pub fn orthonormal_complement_vecs(basis: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let target = n.saturating_sub(basis.len());
    let mut current: Vec<Vec<f64>> = basis.to_vec();
    let mut out = Vec::with_capacity(target);
    let mut candidates: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    for cand in candidates.iter_mut() {
        project_out(cand, &current);
    }
    while out.len() < target {
        let (best, best_norm) = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (i, norm(c)))
            .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == usize::MAX || best_norm <= 1e-12 {
            break;
        }
        let mut q = candidates[best].clone();
        // Re-orthogonalize once more for accuracy.
        project_out(&mut q, &current);
        let nq = norm(&q);
        q.iter_mut().for_each(|x| *x /= nq);
        for cand in candidates.iter_mut() {
            let proj = dot(cand, &q);
            axpy_slice(cand, -proj, &q);
        }
        current.push(q.clone());
        out.push(q);
    }
    out
}

fn project_out(x: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let proj = dot(x, b);
        axpy_slice(x, -proj, b);
    }
}

/// Rows of `basis` (orthonormal) stacked into a matrix, or an empty
/// `0 × n` matrix.
pub fn rows_matrix(rows: &[Vec<f64>], n: usize) -> Matrix {
    if rows.is_empty() {
        return Matrix::zeros(0, n);
    }
    Matrix::from_rows(rows).expect("rows of equal length")
}

/// Orthogonal projector `Bᵀ B` onto the span of the (orthonormal) rows of
/// `basis`.
pub fn projector(basis: &Matrix) -> Matrix {
    basis.transpose().mul_unchecked(basis)
}

/// Orthonormal basis (as rows) for the complement of the row span of
/// `basis`.
pub fn complement_rows(basis: &Matrix) -> Matrix {
    let n = basis.cols();
    let rows = basis.to_rows();
    rows_matrix(&orthonormal_complement_vecs(&rows, n), n)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

#[inline]
pub(crate) fn axpy_slice(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Returns `x / ‖x‖`, or `None` for the zero vector.
pub fn normalized(x: &[f64]) -> Option<Vec<f64>> {
    let n = norm(x);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    Some(x.iter().map(|v| v / n).collect())
}
