//! Dense third-order tensors.
//!
//! Data is row-major: entry `(i, j, k)` lives at `i·d2·d3 + j·d3 + k`.
//! Modes are numbered 1, 2, 3 in the public API.
//!
//! The multilinear transform `X(M₁, M₂, M₃)` contracts mode `m` of `X`
//! against the rows of `Mₘ`:
//!
//! ```text
//! X(M₁,M₂,M₃)[i,j,k] = Σ_{x,y,z} X[x,y,z] · M₁[x,i] · M₂[y,j] · M₃[z,k]
//! ```
//!
//! so a factor matrix `A ∈ ℝ^{r×d}` maps an `r`-sized mode to a `d`-sized
//! one. It is evaluated one mode at a time.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::objective::FactorPoint;
use crate::random;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let len = dims[0] * dims[1] * dims[2];
        if data.len() != len {
            return Err(Error::DimensionMismatch(alloc::format!(
                "tensor {}x{}x{} needs {} entries, got {}",
                dims[0],
                dims[1],
                dims[2],
                len,
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    /// `a ⊗ b ⊗ c`.
    pub fn outer(a: &[f64], b: &[f64], c: &[f64]) -> Self {
        let mut t = Self::zeros([a.len(), b.len(), c.len()]);
        let mut idx = 0;
        for ai in a {
            for bj in b {
                let ab = ai * bj;
                for ck in c {
                    t.data[idx] = ab * ck;
                    idx += 1;
                }
            }
        }
        t
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn inner(&self, other: &Tensor3) -> Result<f64> {
        self.check_same(other)?;
        Ok(linalg::dot(&self.data, &other.data))
    }

    pub fn norm_f(&self) -> f64 {
        linalg::norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn add(&self, other: &Tensor3) -> Result<Tensor3> {
        self.check_same(other)?;
        let mut out = self.clone();
        linalg::axpy_slice(&mut out.data, 1.0, &other.data);
        Ok(out)
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        self.check_same(other)?;
        let mut out = self.clone();
        linalg::axpy_slice(&mut out.data, -1.0, &other.data);
        Ok(out)
    }

    pub fn scale(&self, alpha: f64) -> Tensor3 {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= alpha);
        out
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor3) {
        debug_assert_eq!(self.dims, other.dims);
        linalg::axpy_slice(&mut self.data, alpha, &other.data);
    }

    fn check_same(&self, other: &Tensor3) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(alloc::format!(
                "tensor dims {:?} vs {:?}",
                self.dims,
                other.dims
            )));
        }
        Ok(())
    }

    /// Mode-`mode` flattening `X₍ₘ₎ ∈ ℝ^{dₘ × Π_{n≠m} dₙ}`.
    ///
    /// Columns are ordered with the later remaining index fastest, so that
    /// `(S(A,B,C))₍₁₎ = Aᵀ S₍₁₎ (B ⊗ C)`, `(S(A,B,C))₍₂₎ = Bᵀ S₍₂₎ (A ⊗ C)`
    /// and `(S(A,B,C))₍₃₎ = Cᵀ S₍₃₎ (A ⊗ B)` with [`Matrix::kron`].
    pub fn flatten(&self, mode: usize) -> Result<Matrix> {
        let [d1, d2, d3] = self.dims;
        match mode {
            1 => Matrix::from_vec(d1, d2 * d3, self.data.clone()),
            2 => {
                let mut m = Matrix::zeros(d2, d1 * d3);
                for i in 0..d1 {
                    for j in 0..d2 {
                        for k in 0..d3 {
                            m[(j, i * d3 + k)] = self[(i, j, k)];
                        }
                    }
                }
                Ok(m)
            }
            3 => {
                let mut m = Matrix::zeros(d3, d1 * d2);
                for i in 0..d1 {
                    for j in 0..d2 {
                        for k in 0..d3 {
                            m[(k, i * d2 + j)] = self[(i, j, k)];
                        }
                    }
                }
                Ok(m)
            }
            other => Err(Error::InvalidMode(other)),
        }
    }

    /// Gram matrix `X₍ₘ₎ X₍ₘ₎ᵀ` of the mode-`mode` flattening.
    pub fn flattening_gram(&self, mode: usize) -> Result<Matrix> {
        Ok(self.flatten(mode)?.gram())
    }

    /// Mode product `out[..i..] = Σ_x self[..x..] · m[x, i]` on the 0-based
    /// axis `axis`.
    pub fn mode_product(&self, axis: usize, m: &Matrix) -> Result<Tensor3> {
        if axis > 2 {
            return Err(Error::InvalidMode(axis + 1));
        }
        if m.rows() != self.dims[axis] {
            return Err(Error::DimensionMismatch(alloc::format!(
                "mode {}: tensor size {} but matrix has {} rows",
                axis + 1,
                self.dims[axis],
                m.rows()
            )));
        }
        let [n0, n1, n2] = self.dims;
        let mut dims = self.dims;
        dims[axis] = m.cols();
        let mut out = Tensor3::zeros(dims);
        let mc = m.cols();
        match axis {
            0 => {
                let slab = n1 * n2;
                for x in 0..n0 {
                    let src = &self.data[x * slab..(x + 1) * slab];
                    for i in 0..mc {
                        let coef = m[(x, i)];
                        if coef != 0.0 {
                            linalg::axpy_slice(&mut out.data[i * slab..(i + 1) * slab], coef, src);
                        }
                    }
                }
            }
            1 => {
                for a in 0..n0 {
                    for y in 0..n1 {
                        let src = &self.data[(a * n1 + y) * n2..(a * n1 + y + 1) * n2];
                        for j in 0..mc {
                            let coef = m[(y, j)];
                            if coef != 0.0 {
                                let start = (a * mc + j) * n2;
                                linalg::axpy_slice(&mut out.data[start..start + n2], coef, src);
                            }
                        }
                    }
                }
            }
            _ => {
                for row in 0..n0 * n1 {
                    let src = &self.data[row * n2..(row + 1) * n2];
                    let dst = &mut out.data[row * mc..(row + 1) * mc];
                    for (z, &sz) in src.iter().enumerate() {
                        if sz != 0.0 {
                            linalg::axpy_slice(dst, sz, m.row(z));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `X(M₁, M₂, M₃)` where `None` stands for the identity on that mode.
    pub fn transform(&self, mats: [Option<&Matrix>; 3]) -> Result<Tensor3> {
        // Contract the mode that shrinks the tensor most first.
        let mut order = [0usize, 1, 2];
        let ratio = |a: usize| -> f64 {
            mats[a].map_or(1.0, |m| m.cols() as f64 / m.rows().max(1) as f64)
        };
        order.sort_by(|&a, &b| ratio(a).total_cmp(&ratio(b)).then(a.cmp(&b)));
        let mut cur: Option<Tensor3> = None;
        for axis in order {
            if let Some(m) = mats[axis] {
                let next = cur.as_ref().unwrap_or(self).mode_product(axis, m)?;
                cur = Some(next);
            }
        }
        Ok(cur.unwrap_or_else(|| self.clone()))
    }

    /// Trilinear form `X(u, v, w)`.
    pub fn apply(&self, u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
        let [d1, d2, d3] = self.dims;
        if u.len() != d1 || v.len() != d2 || w.len() != d3 {
            return Err(Error::DimensionMismatch(alloc::format!(
                "vectors of length ({}, {}, {}) against tensor {:?}",
                u.len(),
                v.len(),
                w.len(),
                self.dims
            )));
        }
        let mut total = 0.0;
        for i in 0..d1 {
            if u[i] == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for j in 0..d2 {
                let off = self.offset(i, j, 0);
                acc += v[j] * linalg::dot(&self.data[off..off + d3], w);
            }
            total += u[i] * acc;
        }
        Ok(total)
    }

    /// Contraction leaving mode `mode` free: `X(I,v,w)`, `X(u,I,w)` or
    /// `X(u,v,I)`; the vector in the free slot is ignored.
    pub fn contract_except(&self, mode: usize, u: &[f64], v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let [d1, d2, d3] = self.dims;
        let mut out;
        match mode {
            1 => {
                out = vec![0.0; d1];
                for i in 0..d1 {
                    let mut acc = 0.0;
                    for j in 0..d2 {
                        let off = self.offset(i, j, 0);
                        acc += v[j] * linalg::dot(&self.data[off..off + d3], w);
                    }
                    out[i] = acc;
                }
            }
            2 => {
                out = vec![0.0; d2];
                for i in 0..d1 {
                    for j in 0..d2 {
                        let off = self.offset(i, j, 0);
                        out[j] += u[i] * linalg::dot(&self.data[off..off + d3], w);
                    }
                }
            }
            3 => {
                out = vec![0.0; d3];
                for i in 0..d1 {
                    for j in 0..d2 {
                        let coef = u[i] * v[j];
                        if coef != 0.0 {
                            let off = self.offset(i, j, 0);
                            linalg::axpy_slice(&mut out, coef, &self.data[off..off + d3]);
                        }
                    }
                }
            }
            other => return Err(Error::InvalidMode(other)),
        }
        Ok(out)
    }
}

impl Default for Tensor3 {
    fn default() -> Self {
        Tensor3::zeros([0, 0, 0])
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[self.offset(i, j, k)]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        let off = self.offset(i, j, k);
        &mut self.data[off]
    }
}

/// `S(A, B, C)` with `S ∈ ℝ^{r₁×r₂×r₃}` and `A ∈ ℝ^{r₁×d₁}`, etc.
pub fn multilinear_transform(s: &Tensor3, a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Tensor3> {
    s.transform([Some(a), Some(b), Some(c)])
}

/// `Mode` flattening, see [`Tensor3::flatten`].
pub fn flatten(x: &Tensor3, mode: usize) -> Result<Matrix> {
    x.flatten(mode)
}

pub fn kron(p: &Matrix, q: &Matrix) -> Matrix {
    p.kron(q)
}

/// Best rank-one triple found by higher-order power iteration.
///
/// `sigma` is a lower bound on `‖X‖₂`; the exact tensor spectral norm is
/// NP-hard in general and is never claimed.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTriple {
    pub sigma: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// Largest of the three stationarity residuals `‖X(I,v,w) − σu‖` etc.
    pub residual: f64,
    pub converged: bool,
}

const SPECTRAL_SEED: u64 = 0x5eed_0f_5eed;

/// Alternating higher-order power iteration with `restarts` starting
/// points. The first start uses the leading singular vectors of the mode
/// flattenings; the rest are seeded random unit vectors.
pub fn spectral_norm(x: &Tensor3, restarts: usize, tol: f64, max_iters: usize) -> Result<SpectralTriple> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("spectral_norm needs at least one restart".into()));
    }
    let [d1, d2, d3] = x.dims();
    let e = |n: usize| {
        let mut v = vec![0.0; n];
        if n > 0 {
            v[0] = 1.0;
        }
        v
    };
    if x.data().iter().all(|&v| v == 0.0) {
        return Ok(SpectralTriple {
            sigma: 0.0,
            u: e(d1),
            v: e(d2),
            w: e(d3),
            residual: 0.0,
            converged: true,
        });
    }

    let mut rng = random::rng_from_seed(SPECTRAL_SEED);
    let mut best: Option<SpectralTriple> = None;
    for restart in 0..restarts {
        let (v0, w0) = if restart == 0 {
            (leading_left(x, 2)?, leading_left(x, 3)?)
        } else {
            (random::unit_vec(&mut rng, d2), random::unit_vec(&mut rng, d3))
        };
        let cand = power_iterate(x, v0, w0, tol, max_iters)?;
        let better = match &best {
            None => true,
            Some(b) => cand.sigma > b.sigma,
        };
        if better {
            best = Some(cand);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn leading_left(x: &Tensor3, mode: usize) -> Result<Vec<f64>> {
    let svd = x.flatten(mode)?.svd();
    Ok(svd.u.col(0))
}

fn power_iterate(x: &Tensor3, mut v: Vec<f64>, mut w: Vec<f64>, tol: f64, max_iters: usize) -> Result<SpectralTriple> {
    let [d1, _, _] = x.dims();
    let mut u = vec![0.0; d1];
    let mut sigma = 0.0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..max_iters.max(1) {
        let Some(nu) = linalg::normalized(&x.contract_except(1, &u, &v, &w)?) else {
            break;
        };
        u = nu;
        let Some(nv) = linalg::normalized(&x.contract_except(2, &u, &v, &w)?) else {
            break;
        };
        v = nv;
        let Some(nw) = linalg::normalized(&x.contract_except(3, &u, &v, &w)?) else {
            break;
        };
        w = nw;
        sigma = x.apply(&u, &v, &w)?;
        residual = stationarity_residual(x, sigma, &u, &v, &w)?;
        if residual <= tol {
            converged = true;
            break;
        }
    }
    if !residual.is_finite() {
        residual = stationarity_residual(x, sigma, &u, &v, &w)?;
    }
    Ok(SpectralTriple {
        sigma,
        u,
        v,
        w,
        residual,
        converged,
    })
}

/// `max(‖X(I,v,w) − σu‖, ‖X(u,I,w) − σv‖, ‖X(u,v,I) − σw‖)`.
pub fn stationarity_residual(x: &Tensor3, sigma: f64, u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (mode, vec) in [(1, u), (2, v), (3, w)] {
        let c = x.contract_except(mode, u, v, w)?;
        let r: f64 = c
            .iter()
            .zip(vec)
            .map(|(ci, xi)| (ci - sigma * xi) * (ci - sigma * xi))
            .sum();
        worst = worst.max(crate::math::sqrt(r));
    }
    Ok(worst)
}

/// Truncated higher-order SVD: each factor's rows are the top-`r` left
/// singular vectors of the matching flattening, and
/// `S = T(Aᵀ, Bᵀ, Cᵀ)`.
pub fn hosvd(t: &Tensor3, r: usize) -> Result<FactorPoint> {
    hosvd_ranks(t, [r, r, r])
}

pub fn hosvd_ranks(t: &Tensor3, ranks: [usize; 3]) -> Result<FactorPoint> {
    let dims = t.dims();
    for m in 0..3 {
        if ranks[m] == 0 {
            return Err(Error::InvalidArgument("rank must be at least 1".into()));
        }
        if ranks[m] > dims[m] {
            return Err(Error::RankTooLarge {
                rank: ranks[m],
                dim: dims[m],
                mode: m + 1,
            });
        }
    }
    let mut factors = Vec::with_capacity(3);
    for m in 0..3 {
        let svd = t.flatten(m + 1)?.svd();
        let mut f = Matrix::zeros(ranks[m], dims[m]);
        for x in 0..ranks[m] {
            for i in 0..dims[m] {
                f[(x, i)] = svd.u[(i, x)];
            }
        }
        factors.push(f);
    }
    let c = factors.pop().expect("three factors");
    let b = factors.pop().expect("three factors");
    let a = factors.pop().expect("three factors");
    let s = t.transform([Some(&a.transpose()), Some(&b.transpose()), Some(&c.transpose())])?;
    FactorPoint::new(s, a, b, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, gaussian_vec, rng_from_seed};

    fn random_tensor(seed: u64, dims: [usize; 3]) -> Tensor3 {
        let mut rng = rng_from_seed(seed);
        Tensor3::from_vec(dims, gaussian_vec(&mut rng, dims[0] * dims[1] * dims[2])).unwrap()
    }

    #[test]
    fn scalar_transform() {
        let s = Tensor3::from_vec([1, 1, 1], vec![2.0]).unwrap();
        let m = |v: f64| Matrix::from_vec(1, 1, vec![v]).unwrap();
        let out = multilinear_transform(&s, &m(3.0), &m(5.0), &m(7.0)).unwrap();
        assert_eq!(out.data(), &[210.0]);
    }

    #[test]
    fn identity_transform_returns_core() {
        let s = random_tensor(1, [3, 3, 3]);
        let i = Matrix::identity(3);
        let out = multilinear_transform(&s, &i, &i, &i).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn transform_reports_offending_mode() {
        let s = Tensor3::zeros([2, 2, 2]);
        let ok = Matrix::zeros(2, 3);
        let bad = Matrix::zeros(3, 3);
        let err = multilinear_transform(&s, &ok, &bad, &ok).unwrap_err();
        match err {
            Error::DimensionMismatch(msg) => assert!(msg.contains("mode 2"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flatten_column_vector_case() {
        let x = Tensor3::from_vec([1, 1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let f = x.flatten(3).unwrap();
        assert_eq!(f.shape(), (4, 1));
        assert_eq!(f.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(x.flatten(4), Err(Error::InvalidMode(4))));
    }

    #[test]
    fn flatten_preserves_norm() {
        let x = random_tensor(2, [2, 3, 4]);
        for m in 1..=3 {
            assert!((x.flatten(m).unwrap().norm_f() - x.norm_f()).abs() < 1e-13);
        }
    }

    #[test]
    fn inner_and_norm() {
        let x = random_tensor(3, [2, 2, 3]);
        let z = Tensor3::zeros([2, 2, 3]);
        assert!((x.inner(&x).unwrap() - x.norm_f().powi(2)).abs() < 1e-12);
        assert_eq!(x.inner(&z).unwrap(), 0.0);
        assert!(x.inner(&Tensor3::zeros([2, 2, 2])).is_err());
    }

    #[test]
    fn rank_one_spectral_norm() {
        let a = [0.6, 0.8];
        let b = [1.0 / 3f64.sqrt(); 3];
        let c = [0.0, 1.0];
        let x = Tensor3::outer(&a, &b, &c);
        let t = spectral_norm(&x, 5, 1e-12, 500).unwrap();
        assert!((t.sigma - 1.0).abs() < 1e-10);
        let dot_abs = |p: &[f64], q: &[f64]| linalg::dot(p, q).abs();
        assert!((dot_abs(&t.u, &a) - 1.0).abs() < 1e-10);
        assert!((dot_abs(&t.v, &b) - 1.0).abs() < 1e-10);
        assert!((dot_abs(&t.w, &c) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_tensor_spectral_norm() {
        let t = spectral_norm(&Tensor3::zeros([2, 3, 2]), 3, 1e-10, 100).unwrap();
        assert_eq!(t.sigma, 0.0);
        assert_eq!(t.u, vec![1.0, 0.0]);
        assert!(spectral_norm(&Tensor3::zeros([2, 2, 2]), 0, 1e-10, 10).is_err());
    }

    #[test]
    fn spectral_triple_is_stationary() {
        let x = random_tensor(4, [3, 4, 3]);
        let t = spectral_norm(&x, 10, 1e-10, 5000).unwrap();
        assert!(t.converged);
        assert!(t.residual <= 1e-10);
        for v in [&t.u, &t.v, &t.w] {
            assert!((linalg::norm(v) - 1.0).abs() < 1e-12);
        }
        assert!(t.sigma <= x.norm_f() + 1e-12);
    }

    #[test]
    fn hosvd_recovers_exact_rank() {
        let mut rng = rng_from_seed(5);
        let s = Tensor3::from_vec([2, 2, 2], gaussian_vec(&mut rng, 8)).unwrap();
        let a = gaussian_matrix(&mut rng, 2, 6);
        let b = gaussian_matrix(&mut rng, 2, 6);
        let c = gaussian_matrix(&mut rng, 2, 6);
        let t = multilinear_transform(&s, &a, &b, &c).unwrap();
        let p = hosvd(&t, 2).unwrap();
        assert!(crate::objective::loss(&p, &t).unwrap() <= 1e-10);
        assert!(p.a().gram().sub(&Matrix::identity(2)).unwrap().norm_f() < 1e-12);
    }

    #[test]
    fn hosvd_edge_cases() {
        let z = Tensor3::zeros([3, 3, 3]);
        let p = hosvd(&z, 2).unwrap();
        assert_eq!(p.s().norm_f(), 0.0);
        assert_eq!(crate::objective::loss(&p, &z).unwrap(), 0.0);

        let t = random_tensor(6, [3, 3, 3]);
        let p = hosvd(&t, 3).unwrap();
        assert!(crate::objective::loss(&p, &t).unwrap() <= 1e-10);
        assert!(matches!(hosvd(&t, 4), Err(Error::RankTooLarge { .. })));
    }
}
