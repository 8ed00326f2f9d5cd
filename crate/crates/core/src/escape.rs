//! Directions of improvement at high-order saddle points.
//!
//! Three families:
//! - remove an extraneous component `ΔM = −M₃`,
//! - refit the core on the large subspaces (`ΔS = T(A₁⁺,B₁⁺,C₁⁺) − S₁,₁,₁`),
//! - add missing directions, with vectors drawn by [`sample_missing_directions`]
//!   and a step chosen by [`sign_flip_search`].
//!
//! A block pattern `(i,j,k) ∈ {1,2}³` picks, per mode, either the large
//! subspace (1) or its complement (2). Patterns with at least one 2 are the
//! missing-direction patterns.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::math;
use crate::objective::{self, FactorPoint};
use crate::random;
use crate::subspace::SubspaceSplit;
use crate::tensor::Tensor3;

/// Pseudoinverse cutoff relative to the largest singular value.
pub const PINV_CUTOFF: f64 = 1e-12;

/// Block patterns with at least one missing mode, ordered by the number of
/// missing modes.
pub const MISSING_PATTERNS: [[usize; 3]; 7] = [
    [2, 1, 1],
    [1, 2, 1],
    [1, 1, 2],
    [2, 2, 1],
    [2, 1, 2],
    [1, 2, 2],
    [2, 2, 2],
];

/// Vectors returned by the sampler for one block pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingSample {
    pub pattern: [usize; 3],
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// For index-1 modes, `α = 1/‖u'‖` so that `M₁ᵀu = α·a`.
    pub alpha: [Option<f64>; 3],
}

impl MissingSample {
    pub fn missing_count(&self) -> usize {
        self.pattern.iter().filter(|&&x| x == 2).count()
    }

    /// `true` when some index-1 mode achieved `α < σ`.
    pub fn alpha_below(&self, sigma: f64) -> bool {
        self.alpha.iter().flatten().any(|&a| a < sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionKind {
    RemoveExtraneous(usize),
    CoreFix,
    Sampled([usize; 3]),
    Gradient,
    NegativeCurvature,
}

/// A nonzero direction in parameter space together with how it was built.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementDirection {
    pub delta: FactorPoint,
    pub kind: DirectionKind,
    pub sample: Option<MissingSample>,
    /// Signs applied to `(ΔS, ΔA, ΔB, ΔC)`.
    pub signs: Option<[f64; 4]>,
}

impl ImprovementDirection {
    pub fn new(delta: FactorPoint, kind: DirectionKind) -> Result<Self> {
        if !(delta.norm_f() > 0.0) {
            return Err(Error::ZeroDirection);
        }
        Ok(Self {
            delta,
            kind,
            sample: None,
            signs: None,
        })
    }
}

fn check_pattern(pattern: [usize; 3]) -> Result<()> {
    if pattern.iter().any(|&x| x != 1 && x != 2) {
        return Err(Error::InvalidArgument(alloc::format!("block pattern {pattern:?} must use indices 1 and 2")));
    }
    Ok(())
}

/// Draws `a, b, c, u, v, w` for block pattern `pattern`.
///
/// For each mode with index 1, `a` is uniform on the unit sphere of `U₁`
/// and `u = (M₁ᵀ)⁺a / ‖(M₁ᵀ)⁺a‖`. For index 2, `a` is uniform in `U₂` and
/// `u` uniform in `V₂`. All draws are normalized Gaussians.
pub fn sample_missing_directions<R: Rng + ?Sized>(
    split: &SubspaceSplit,
    pattern: [usize; 3],
    rng: &mut R,
) -> Result<MissingSample> {
    check_pattern(pattern)?;
    let mut outer: [Vec<f64>; 3] = Default::default();
    let mut inner: [Vec<f64>; 3] = Default::default();
    let mut alpha = [None; 3];
    for m in 0..3 {
        let ms = &split.modes[m];
        if pattern[m] == 1 {
            if ms.rank1() == 0 {
                return Err(Error::NoMissingDirection(alloc::format!(
                    "mode {} has no singular value above {}",
                    m + 1,
                    split.sigma
                )));
            }
            let a = random::unit_vec_in_span(rng, &ms.u1).expect("nonempty basis");
            let pinv = ms.m1.transpose().pinv(PINV_CUTOFF);
            let up = pinv.mat_vec(&a);
            let n = linalg::norm(&up);
            let u = linalg::normalized(&up).ok_or_else(|| {
                Error::NoMissingDirection(alloc::format!("mode {}: pseudoinverse image vanished", m + 1))
            })?;
            alpha[m] = Some(1.0 / n);
            outer[m] = a;
            inner[m] = u;
        } else {
            let a = random::unit_vec_in_span(rng, &ms.u2);
            let u = random::unit_vec_in_span(rng, &ms.v2);
            match (a, u) {
                (Some(a), Some(u)) => {
                    outer[m] = a;
                    inner[m] = u;
                }
                _ => {
                    return Err(Error::NoMissingDirection(alloc::format!(
                        "mode {} has no small-singular subspace (rank {} of {})",
                        m + 1,
                        ms.rank1(),
                        ms.m1.rows()
                    )))
                }
            }
        }
    }
    let [a, b, c] = outer;
    let [u, v, w] = inner;
    Ok(MissingSample {
        pattern,
        a,
        b,
        c,
        u,
        v,
        w,
        alpha,
    })
}

/// Direction for a sampled pattern.
///
/// One missing mode `m`: `ΔMₘ = σ·u aᵀ` and `ΔS = u⊗v⊗w`. Two or three
/// missing modes: `ΔMₘ = u aᵀ` on each missing mode and `ΔS = u⊗v⊗w`.
pub fn build_sampled_direction(sample: &MissingSample, sigma: f64) -> Result<ImprovementDirection> {
    check_pattern(sample.pattern)?;
    let missing = sample.missing_count();
    if missing == 0 {
        return Err(Error::InvalidArgument("pattern (1,1,1) has no missing direction".into()));
    }
    let outer = [&sample.a, &sample.b, &sample.c];
    let inner = [&sample.u, &sample.v, &sample.w];
    let ranks = [sample.u.len(), sample.v.len(), sample.w.len()];
    let dims = [sample.a.len(), sample.b.len(), sample.c.len()];
    if ranks.contains(&0) || dims.contains(&0) {
        return Err(Error::DimensionMismatch("sampled vectors must be nonempty".into()));
    }
    let scale = if missing == 1 { sigma } else { 1.0 };
    let mut delta = FactorPoint::zeros_shaped(ranks, dims);
    *delta.s_mut() = Tensor3::outer(&sample.u, &sample.v, &sample.w);
    for m in 0..3 {
        if sample.pattern[m] == 2 {
            *delta.factor_mut(m + 1) = Matrix::outer(inner[m], outer[m]).scale(scale);
        }
    }
    let mut dir = ImprovementDirection::new(delta, DirectionKind::Sampled(sample.pattern))?;
    dir.sample = Some(sample.clone());
    Ok(dir)
}

/// Geometric grid of 13 points from `center·10⁻²` to `center·10²`.
pub fn delta_grid(center: f64) -> Vec<f64> {
    (0..13)
        .map(|i| center * math::exp10(-2.0 + 4.0 * i as f64 / 12.0))
        .collect()
}

/// Theory step centre: `σ^{1/8}` for three missing modes, `σ^{1/4}`
/// otherwise.
pub fn delta_center(sigma: f64, missing: usize) -> f64 {
    if missing >= 3 {
        math::powf(sigma, 0.125)
    } else {
        math::powf(sigma, 0.25)
    }
}

/// Outcome of a line or sign search. `improvement = f(p) − f(p + step·dir)`
/// is never negative; when nothing helps, `step = 0` and `improvement = 0`.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub direction: ImprovementDirection,
    pub step: f64,
    pub f_before: f64,
    pub f_after: f64,
    pub improvement: f64,
}

fn apply_signs(delta: &FactorPoint, signs: [f64; 4]) -> FactorPoint {
    let mut out = delta.clone();
    out.s_mut().data_mut().iter_mut().for_each(|x| *x *= signs[0]);
    for m in 1..=3 {
        out.factor_mut(m).data_mut().iter_mut().for_each(|x| *x *= signs[m]);
    }
    out
}

/// Every sign pattern over the nonzero blocks of `delta`.
pub fn sign_patterns(delta: &FactorPoint) -> Vec<[f64; 4]> {
    let nonzero = [
        delta.s().norm_f() > 0.0,
        delta.a().norm_f() > 0.0,
        delta.b().norm_f() > 0.0,
        delta.c().norm_f() > 0.0,
    ];
    let free: Vec<usize> = (0..4).filter(|&i| nonzero[i]).collect();
    (0..1usize << free.len())
        .map(|mask| {
            let mut signs = [1.0; 4];
            for (bit, &block) in free.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    signs[block] = -1.0;
                }
            }
            signs
        })
        .collect()
}

/// Evaluates `f(p + δ·s(dir))` for every sign pattern `s` and every `δ` in
/// `grid`, returning the best point found.
pub fn sign_flip_search(
    p: &FactorPoint,
    t: &Tensor3,
    lambda: f64,
    dir: &ImprovementDirection,
    grid: &[f64],
) -> Result<SearchOutcome> {
    let f0 = objective::objective(p, t, lambda)?.f;
    let mut best = SearchOutcome {
        direction: dir.clone(),
        step: 0.0,
        f_before: f0,
        f_after: f0,
        improvement: 0.0,
    };
    let mut best_signs = None;
    let mut best_delta = None;
    for signs in sign_patterns(&dir.delta) {
        let delta = apply_signs(&dir.delta, signs);
        for &step in grid {
            let f = objective::objective(&p.step(step, &delta), t, lambda)?.f;
            if f < best.f_after {
                best.f_after = f;
                best.step = step;
                best_signs = Some(signs);
                best_delta = Some(delta.clone());
            }
        }
    }
    if let (Some(signs), Some(delta)) = (best_signs, best_delta) {
        best.direction.delta = delta;
        best.direction.signs = Some(signs);
        best.improvement = f0 - best.f_after;
    }
    Ok(best)
}

/// Best step along a fixed direction over `grid` (no sign changes).
pub fn line_search(
    p: &FactorPoint,
    t: &Tensor3,
    lambda: f64,
    dir: &ImprovementDirection,
    grid: &[f64],
) -> Result<SearchOutcome> {
    let f0 = objective::objective(p, t, lambda)?.f;
    let mut best = SearchOutcome {
        direction: dir.clone(),
        step: 0.0,
        f_before: f0,
        f_after: f0,
        improvement: 0.0,
    };
    for (step, f) in objective::eval_along(p, &dir.delta, t, lambda, grid)? {
        if f < best.f_after {
            best.f_after = f;
            best.step = step;
        }
    }
    best.improvement = f0 - best.f_after;
    Ok(best)
}

/// `ΔMₘ = −M₃` for mode `mode`, other blocks zero.
pub fn remove_extraneous_direction(p: &FactorPoint, split: &SubspaceSplit, mode: usize) -> Result<ImprovementDirection> {
    if !(1..=3).contains(&mode) {
        return Err(Error::InvalidMode(mode));
    }
    let m3 = &split.m3[mode - 1];
    if m3.norm_f() == 0.0 {
        return Err(Error::NoDirection(alloc::format!("mode {mode} lies inside the true subspace")));
    }
    let mut delta = p.zeros_like();
    *delta.factor_mut(mode) = m3.scale(-1.0);
    ImprovementDirection::new(delta, DirectionKind::RemoveExtraneous(mode))
}

/// `ΔS = T(A₁⁺, B₁⁺, C₁⁺) − S(Proj_{V₁,₁}, Proj_{V₂,₁}, Proj_{V₃,₁})`, other
/// blocks zero.
pub fn core_fix_direction(p: &FactorPoint, t: &Tensor3, split: &SubspaceSplit) -> Result<ImprovementDirection> {
    let mut pinvs = Vec::with_capacity(3);
    let mut projs = Vec::with_capacity(3);
    for (m, ms) in split.modes.iter().enumerate() {
        if ms.rank1() == 0 {
            return Err(Error::NoDirection(alloc::format!("mode {} has no large singular part", m + 1)));
        }
        pinvs.push(ms.m1.pinv(PINV_CUTOFF));
        projs.push(linalg::projector(&ms.v1));
    }
    let target = t.transform([Some(&pinvs[0]), Some(&pinvs[1]), Some(&pinvs[2])])?;
    let current = p.s().transform([Some(&projs[0]), Some(&projs[1]), Some(&projs[2])])?;
    let mut delta = p.zeros_like();
    *delta.s_mut() = target.sub(&current)?;
    ImprovementDirection::new(delta, DirectionKind::CoreFix)
}
