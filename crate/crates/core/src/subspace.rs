//! Singular-value-threshold splits of the factor matrices.
//!
//! For a factor `M ∈ ℝ^{r×d}` and threshold `σ`, the right singular vectors
//! (in `ℝᵈ`) with singular value above `σ` span `U₁` and the matching left
//! vectors (in `ℝʳ`) span `V₁`; `U₂`, `V₂` are the orthogonal complements.
//! Then `M = M₁ + M₂` with `M₁ = Proj_{V₁} M` holding the large part.
//! Separately, `M₃ = M(I − P)` is the component of `M` outside the column
//! span of the matching flattening of `T`.
//!
//! Singular values exactly equal to `σ` go to the small part.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::math;
use crate::objective::FactorPoint;
use crate::tensor::Tensor3;

/// Default relative cutoff for the numerical rank of `T₍ₘ₎`.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Threshold split of one factor matrix.
#[derive(Debug, Clone)]
pub struct ModeSplit {
    pub m1: Matrix,
    pub m2: Matrix,
    /// Orthonormal rows spanning `U₁ ⊂ ℝᵈ`.
    pub u1: Matrix,
    /// Orthonormal rows spanning `U₂ = U₁^⊥`.
    pub u2: Matrix,
    /// Orthonormal rows spanning `V₁ ⊂ ℝʳ`.
    pub v1: Matrix,
    /// Orthonormal rows spanning `V₂ = V₁^⊥`.
    pub v2: Matrix,
    /// All `min(r, d)` singular values, descending.
    pub singular_values: Vec<f64>,
    pub sigma: f64,
}

impl ModeSplit {
    /// `rank(M₁)`.
    pub fn rank1(&self) -> usize {
        self.v1.rows()
    }
}

/// Splits `m` at `sigma`.
pub fn split(m: &Matrix, sigma: f64) -> Result<ModeSplit> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("threshold must be nonnegative, got {sigma}")));
    }
    let (r, d) = m.shape();
    let svd = m.svd();
    let k = svd.rank_above(sigma);
    let mut m1 = Matrix::zeros(r, d);
    let mut v1_rows = Vec::with_capacity(k);
    let mut u1_rows = Vec::with_capacity(k);
    for idx in 0..k {
        let left = svd.u.col(idx);
        let right = svd.v.col(idx);
        let s = svd.s[idx];
        for i in 0..r {
            let li = s * left[i];
            if li != 0.0 {
                linalg::axpy_slice(m1.row_mut(i), li, &right);
            }
        }
        v1_rows.push(left);
        u1_rows.push(right);
    }
    let m2 = m.sub(&m1)?;
    let v1 = linalg::rows_matrix(&v1_rows, r);
    let u1 = linalg::rows_matrix(&u1_rows, d);
    let v2 = linalg::complement_rows(&v1);
    let u2 = linalg::complement_rows(&u1);
    Ok(ModeSplit {
        m1,
        m2,
        u1,
        u2,
        v1,
        v2,
        singular_values: svd.s,
        sigma,
    })
}

/// Orthogonal projector onto the span of the left singular vectors of
/// `T₍ₘ₎` whose singular value exceeds `rank_tol · σ_max`.
pub fn true_projection(t: &Tensor3, mode: usize, rank_tol: f64) -> Result<Matrix> {
    let f = t.flatten(mode)?;
    let n = f.rows();
    let svd = f.svd();
    let smax = svd.s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(Matrix::zeros(n, n));
    }
    let rows: Vec<Vec<f64>> = (0..svd.s.len())
        .filter(|&i| svd.s[i] > rank_tol * smax)
        .map(|i| svd.u.col(i))
        .collect();
    Ok(linalg::projector(&linalg::rows_matrix(&rows, n)))
}

/// Splits of all three factors plus the true-subspace projections.
#[derive(Debug, Clone)]
pub struct SubspaceSplit {
    pub sigma: f64,
    pub modes: [ModeSplit; 3],
    /// `P_m`, projection onto the column span of `T₍ₘ₎`.
    pub p: [Matrix; 3],
    /// `M₃ = M(I − P_m)`.
    pub m3: [Matrix; 3],
}

impl SubspaceSplit {
    pub fn new(p: &FactorPoint, t: &Tensor3, sigma: f64, rank_tol: f64) -> Result<Self> {
        if p.dims() != t.dims() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "point has dims {:?} but tensor has {:?}",
                p.dims(),
                t.dims()
            )));
        }
        let s1 = split(p.a(), sigma)?;
        let s2 = split(p.b(), sigma)?;
        let s3 = split(p.c(), sigma)?;
        let mut projections = Vec::with_capacity(3);
        let mut extraneous = Vec::with_capacity(3);
        for m in 1..=3 {
            let proj = true_projection(t, m, rank_tol)?;
            let f = p.factor(m);
            let inside = f.mul_unchecked(&proj);
            extraneous.push(f.sub(&inside)?);
            projections.push(proj);
        }
        let [p1, p2, p3]: [Matrix; 3] = projections.try_into().expect("three modes");
        let [e1, e2, e3]: [Matrix; 3] = extraneous.try_into().expect("three modes");
        Ok(Self {
            sigma,
            modes: [s1, s2, s3],
            p: [p1, p2, p3],
            m3: [e1, e2, e3],
        })
    }

    /// Split for mode `mode ∈ {1,2,3}`.
    pub fn mode(&self, mode: usize) -> &ModeSplit {
        &self.modes[mode - 1]
    }
}

/// Projections of `T` and `S` onto the eight subspace blocks.
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    /// `T_{i,j,k} = T(Proj_{U₁,ᵢ}, Proj_{U₂,ⱼ}, Proj_{U₃,ₖ})`, indexed `[i-1][j-1][k-1]`.
    pub t_blocks: [[[Tensor3; 2]; 2]; 2],
    /// `S_{i,j,k} = S(Proj_{V₁,ᵢ}, Proj_{V₂,ⱼ}, Proj_{V₃,ₖ})`.
    pub s_blocks: [[[Tensor3; 2]; 2]; 2],
    /// `‖S_{i,j,k}(Aᵢ, Bⱼ, Cₖ) − T_{i,j,k}‖_F²`.
    pub residuals: [[[f64; 2]; 2]; 2],
}

impl BlockDecomposition {
    pub fn total_residual(&self) -> f64 {
        self.residuals.iter().flatten().flatten().sum()
    }

    pub fn t_block(&self, i: usize, j: usize, k: usize) -> &Tensor3 {
        &self.t_blocks[i - 1][j - 1][k - 1]
    }

    pub fn residual(&self, i: usize, j: usize, k: usize) -> f64 {
        self.residuals[i - 1][j - 1][k - 1]
    }
}

pub fn block_decompose(p: &FactorPoint, t: &Tensor3, split: &SubspaceSplit) -> Result<BlockDecomposition> {
    let proj_u: [[Matrix; 2]; 3] = core::array::from_fn(|m| {
        let s = &split.modes[m];
        [linalg::projector(&s.u1), linalg::projector(&s.u2)]
    });
    let proj_v: [[Matrix; 2]; 3] = core::array::from_fn(|m| {
        let s = &split.modes[m];
        [linalg::projector(&s.v1), linalg::projector(&s.v2)]
    });
    let parts: [[&Matrix; 2]; 3] = core::array::from_fn(|m| [&split.modes[m].m1, &split.modes[m].m2]);

    let mut t_blocks: [[[Tensor3; 2]; 2]; 2] = Default::default();
    let mut s_blocks: [[[Tensor3; 2]; 2]; 2] = Default::default();
    let mut residuals = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let tb = t.transform([Some(&proj_u[0][i]), Some(&proj_u[1][j]), Some(&proj_u[2][k])])?;
                let sb = p.s().transform([Some(&proj_v[0][i]), Some(&proj_v[1][j]), Some(&proj_v[2][k])])?;
                let recon = sb.transform([Some(parts[0][i]), Some(parts[1][j]), Some(parts[2][k])])?;
                let diff = recon.sub(&tb)?;
                residuals[i][j][k] = linalg::dot(diff.data(), diff.data());
                t_blocks[i][j][k] = tb;
                s_blocks[i][j][k] = sb;
            }
        }
    }
    Ok(BlockDecomposition {
        t_blocks,
        s_blocks,
        residuals,
    })
}

/// Projector onto the row span of `m`.
pub fn row_span_projector(m: &Matrix, rel_tol: f64) -> Matrix {
    let svd = m.svd();
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let rows: Vec<Vec<f64>> = (0..svd.s.len())
        .filter(|&i| smax > 0.0 && svd.s[i] > rel_tol * smax)
        .map(|i| svd.v.col(i))
        .collect();
    linalg::projector(&linalg::rows_matrix(&rows, m.cols()))
}

/// Both sides of `‖P − P₁‖_F ≤ 2‖M₂‖_F/σ` where `P`, `P₁` project onto the
/// row spans of `M`, `M₁` and `σ` is the smallest singular value of `M`.
///
/// Returns `(lhs, rhs)`. Fails when `M` or `M₁` does not have full row rank.
pub fn projection_distance_bound(m: &Matrix, m1: &Matrix, m2: &Matrix, sigma: f64) -> Result<(f64, f64)> {
    let r = m.rows();
    if m1.shape() != m.shape() || m2.shape() != m.shape() {
        return Err(Error::DimensionMismatch("M, M1 and M2 must share a shape".into()));
    }
    const TOL: f64 = 1e-10;
    for (name, x) in [("M", m), ("M1", m1)] {
        let svd = x.svd();
        let smax = svd.s.first().copied().unwrap_or(0.0);
        let rank = svd.rank_above(TOL * smax.max(f64::MIN_POSITIVE));
        if rank < r || smax == 0.0 {
            return Err(Error::RankDeficient(alloc::format!("{name} has rank {rank} < {r}")));
        }
    }
    let p = row_span_projector(m, TOL);
    let p1 = row_span_projector(m1, TOL);
    let lhs = p.sub(&p1)?.norm_f();
    let rhs = 2.0 * m2.norm_f() / sigma;
    Ok((lhs, rhs))
}

/// Per-mode flag `rank(M₁) < r`.
pub fn rank_deficiency_flag(split: &SubspaceSplit, _t: &Tensor3, _k: f64, _gamma: f64) -> [bool; 3] {
    core::array::from_fn(|m| {
        let s = &split.modes[m];
        s.rank1() < s.m1.rows()
    })
}

/// Quantities for the rank bound on one mode: with `P` the projector onto
/// the row span of `M₁`, `outside = ‖T(I − P, I, I)‖_F` (mode-permuted) and
/// `bound = 2K√γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankBoundCheck {
    pub deficient: bool,
    pub extraneous_norm: f64,
    pub outside: f64,
    pub bound: f64,
}

pub fn rank_bound_check(split: &SubspaceSplit, t: &Tensor3, k: f64, gamma: f64) -> Result<[RankBoundCheck; 3]> {
    let flags = rank_deficiency_flag(split, t, k, gamma);
    let mut out = [RankBoundCheck {
        deficient: false,
        extraneous_norm: 0.0,
        outside: 0.0,
        bound: 0.0,
    }; 3];
    for m in 0..3 {
        let s = &split.modes[m];
        let n = s.m1.cols();
        let p = linalg::projector(&s.u1);
        let comp = Matrix::identity(n).sub(&p)?;
        let mut mats: [Option<&Matrix>; 3] = [None, None, None];
        mats[m] = Some(&comp);
        let outside = t.transform(mats)?.norm_f();
        out[m] = RankBoundCheck {
            deficient: flags[m],
            extraneous_norm: split.m3[m].norm_f(),
            outside,
            bound: 2.0 * k * math::sqrt(gamma),
        };
    }
    Ok(out)
}
