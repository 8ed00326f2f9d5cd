//! Seeded randomness shared by the sampler, the search driver and the
//! verification checks.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, Matrix};
use crate::tensor::{multilinear_transform, Tensor3};

/// Deterministic, platform-independent generator used everywhere a seed is
/// accepted.
pub type SeedRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeedRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` derived from `seed`.
pub fn stream(seed: u64, stream: u64) -> SeedRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, gaussian_vec(rng, rows * cols)).expect("sized")
}

/// Uniform unit vector in `ℝⁿ` (normalized standard Gaussian).
pub fn unit_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let g = gaussian_vec(rng, n);
        if let Some(u) = linalg::normalized(&g) {
            return u;
        }
    }
}

/// Uniform unit vector in the span of the orthonormal rows of `basis`.
/// Returns `None` when the basis is empty.
pub fn unit_vec_in_span<R: Rng + ?Sized>(rng: &mut R, basis: &Matrix) -> Option<Vec<f64>> {
    if basis.rows() == 0 {
        return None;
    }
    let coeffs = unit_vec(rng, basis.rows());
    linalg::normalized(&basis.transpose_vec(&coeffs))
}

/// Random matrix with orthonormal rows (`rows ≤ cols`).
pub fn orthonormal_rows<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    debug_assert!(rows <= cols);
    let g = gaussian_matrix(rng, cols, rows);
    let svd = g.svd();
    svd.u.transpose()
}

/// Exact multilinear-rank-`(r,r,r)` tensor `S*(A*,B*,C*)` from Gaussian
/// factors, scaled to unit Frobenius norm.
pub fn exact_rank_instance<R: Rng + ?Sized>(rng: &mut R, r: usize, d: usize) -> Tensor3 {
    let s = Tensor3::from_vec([r, r, r], gaussian_vec(rng, r * r * r)).expect("sized");
    let a = gaussian_matrix(rng, r, d);
    let b = gaussian_matrix(rng, r, d);
    let c = gaussian_matrix(rng, r, d);
    let t = multilinear_transform(&s, &a, &b, &c).expect("shapes agree");
    let n = t.norm_f();
    if n > 0.0 {
        t.scale(1.0 / n)
    } else {
        t
    }
}
