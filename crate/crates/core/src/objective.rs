//! The regularized objective `f = L + λ·R` and its derivatives.
//!
//! - `L(S,A,B,C) = ‖S(A,B,C) − T‖²`
//! - `φ(S,A,B,C) = Σ_m ‖M Mᵀ − S₍ₘ₎ S₍ₘ₎ᵀ‖²` for `M ∈ {A, B, C}`
//! - `R = φ²`
//!
//! With `E = S(A,B,C) − T` and `D_A = AAᵀ − S₍₁₎S₍₁₎ᵀ` (similarly `D_B`,
//! `D_C`) the gradients are
//!
//! ```text
//! ∇_S L = 2·E(Aᵀ, Bᵀ, Cᵀ)          ∇_A L = 2·[S(I,B,C)]₍₁₎ E₍₁₎ᵀ
//! ∇_S φ = −4·[S(D_A,I,I) + S(I,D_B,I) + S(I,I,D_C)]
//! ∇_A φ = 4·D_A A                  ∇R = 2φ·∇φ
//! ```
//!
//! and analogously for `B`, `C`. Hessians are never formed; [`hvp`] takes a
//! central difference of the analytic gradient.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::math;
use crate::tensor::Tensor3;

/// A parameter tuple `(S, A, B, C)` with `S ∈ ℝ^{r₁×r₂×r₃}` and factor
/// `M_m ∈ ℝ^{r_m×d_m}`. Also used for gradients and directions.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPoint {
    s: Tensor3,
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

impl FactorPoint {
    pub fn new(s: Tensor3, a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let dims = s.dims();
        for (m, f) in [&a, &b, &c].into_iter().enumerate() {
            if f.rows() != dims[m] {
                return Err(Error::DimensionMismatch(alloc::format!(
                    "mode {}: core size {} but factor has {} rows",
                    m + 1,
                    dims[m],
                    f.rows()
                )));
            }
        }
        Ok(Self { s, a, b, c })
    }

    /// All-zero point with `S ∈ ℝ^{r×r×r}` and factors `r × d`.
    pub fn zeros(r: usize, d: usize) -> Self {
        Self::zeros_shaped([r, r, r], [d, d, d])
    }

    pub fn zeros_shaped(ranks: [usize; 3], dims: [usize; 3]) -> Self {
        Self {
            s: Tensor3::zeros(ranks),
            a: Matrix::zeros(ranks[0], dims[0]),
            b: Matrix::zeros(ranks[1], dims[1]),
            c: Matrix::zeros(ranks[2], dims[2]),
        }
    }

    /// Zero point of the same shape.
    pub fn zeros_like(&self) -> Self {
        Self::zeros_shaped(self.ranks(), self.dims())
    }

    #[inline]
    pub fn s(&self) -> &Tensor3 {
        &self.s
    }

    #[inline]
    pub fn a(&self) -> &Matrix {
        &self.a
    }

    #[inline]
    pub fn b(&self) -> &Matrix {
        &self.b
    }

    #[inline]
    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn s_mut(&mut self) -> &mut Tensor3 {
        &mut self.s
    }

    /// Factor for mode `mode ∈ {1,2,3}`.
    pub fn factor(&self, mode: usize) -> &Matrix {
        match mode {
            1 => &self.a,
            2 => &self.b,
            3 => &self.c,
            _ => panic!("mode {mode} out of range"),
        }
    }

    pub fn factor_mut(&mut self, mode: usize) -> &mut Matrix {
        match mode {
            1 => &mut self.a,
            2 => &mut self.b,
            3 => &mut self.c,
            _ => panic!("mode {mode} out of range"),
        }
    }

    pub fn factors(&self) -> [&Matrix; 3] {
        [&self.a, &self.b, &self.c]
    }

    pub fn into_parts(self) -> (Tensor3, Matrix, Matrix, Matrix) {
        (self.s, self.a, self.b, self.c)
    }

    pub fn ranks(&self) -> [usize; 3] {
        self.s.dims()
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.a.cols(), self.b.cols(), self.c.cols()]
    }

    /// Rank of mode 1; equal across modes in the cubic setting.
    pub fn r(&self) -> usize {
        self.s.dims()[0]
    }

    /// Dimension of mode 1; equal across modes in the cubic setting.
    pub fn d(&self) -> usize {
        self.a.cols()
    }

    pub fn num_params(&self) -> usize {
        self.s.len() + self.a.data().len() + self.b.data().len() + self.c.data().len()
    }

    fn same_shape(&self, other: &FactorPoint) -> bool {
        self.ranks() == other.ranks() && self.dims() == other.dims()
    }

    fn check_same(&self, other: &FactorPoint) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch(alloc::format!(
                "points of shape ranks {:?} dims {:?} vs ranks {:?} dims {:?}",
                self.ranks(),
                self.dims(),
                other.ranks(),
                other.dims()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &FactorPoint) -> Result<FactorPoint> {
        self.check_same(other)?;
        let mut out = self.clone();
        out.axpy(1.0, other);
        Ok(out)
    }

    pub fn sub(&self, other: &FactorPoint) -> Result<FactorPoint> {
        self.check_same(other)?;
        let mut out = self.clone();
        out.axpy(-1.0, other);
        Ok(out)
    }

    pub fn scale(&self, alpha: f64) -> FactorPoint {
        let mut out = self.clone();
        out.scale_mut(alpha);
        out
    }

    pub fn scale_mut(&mut self, alpha: f64) {
        self.s.data_mut().iter_mut().for_each(|x| *x *= alpha);
        for f in [&mut self.a, &mut self.b, &mut self.c] {
            f.data_mut().iter_mut().for_each(|x| *x *= alpha);
        }
    }

    /// `self += alpha · other`. Shapes must agree.
    pub fn axpy(&mut self, alpha: f64, other: &FactorPoint) {
        debug_assert!(self.same_shape(other));
        self.s.axpy(alpha, &other.s);
        self.a.axpy(alpha, &other.a);
        self.b.axpy(alpha, &other.b);
        self.c.axpy(alpha, &other.c);
    }

    /// `self + alpha · other`.
    pub fn step(&self, alpha: f64, other: &FactorPoint) -> FactorPoint {
        let mut out = self.clone();
        out.axpy(alpha, other);
        out
    }

    /// Parameter-space inner product summed over all four blocks.
    pub fn inner(&self, other: &FactorPoint) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &FactorPoint) -> f64 {
        linalg::dot(self.s.data(), other.s.data())
            + linalg::dot(self.a.data(), other.a.data())
            + linalg::dot(self.b.data(), other.b.data())
            + linalg::dot(self.c.data(), other.c.data())
    }

    /// `‖(S,A,B,C)‖_F = (‖S‖² + ‖A‖² + ‖B‖² + ‖C‖²)^{1/2}`.
    pub fn norm_f(&self) -> f64 {
        math::sqrt(self.inner_unchecked(self))
    }

    /// Largest Frobenius norm among the four blocks.
    pub fn max_block_norm(&self) -> f64 {
        [self.s.norm_f(), self.a.norm_f(), self.b.norm_f(), self.c.norm_f()]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.a.is_finite() && self.b.is_finite() && self.c.is_finite()
    }

    /// Flattened parameters in block order `S, A, B, C`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(self.s.data());
        v.extend_from_slice(self.a.data());
        v.extend_from_slice(self.b.data());
        v.extend_from_slice(self.c.data());
        v
    }

    /// Inverse of [`FactorPoint::to_vec`] using `self` as the shape
    /// template.
    pub fn with_values(&self, values: &[f64]) -> Result<FactorPoint> {
        if values.len() != self.num_params() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "expected {} parameters, got {}",
                self.num_params(),
                values.len()
            )));
        }
        let mut out = self.clone();
        let mut off = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&values[off..off + dst.len()]);
            off += dst.len();
        };
        take(out.s.data_mut());
        take(out.a.data_mut());
        take(out.b.data_mut());
        take(out.c.data_mut());
        Ok(out)
    }

    /// `S(A, B, C)`.
    pub fn reconstruct(&self) -> Tensor3 {
        self.s
            .transform([Some(&self.a), Some(&self.b), Some(&self.c)])
            .expect("shapes checked at construction")
    }
}

/// Values of the objective and its parts at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveReport {
    pub loss: f64,
    pub phi: f64,
    pub reg: f64,
    pub f: f64,
    pub lambda: f64,
}

/// `λ = 1/(16 r⁴)`.
pub fn default_lambda(r: usize) -> f64 {
    let r = r as f64;
    1.0 / (16.0 * r * r * r * r)
}

fn check_target(p: &FactorPoint, t: &Tensor3) -> Result<()> {
    if p.dims() != t.dims() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "point has dims {:?} but tensor has {:?}",
            p.dims(),
            t.dims()
        )));
    }
    Ok(())
}

fn residual(p: &FactorPoint, t: &Tensor3) -> Result<Tensor3> {
    check_target(p, t)?;
    let mut e = p.reconstruct();
    e.axpy(-1.0, t);
    Ok(e)
}

/// `L = ‖S(A,B,C) − T‖_F²`.
pub fn loss(p: &FactorPoint, t: &Tensor3) -> Result<f64> {
    let e = residual(p, t)?;
    Ok(linalg::dot(e.data(), e.data()))
}

/// Gram differences `D_m = M Mᵀ − S₍ₘ₎ S₍ₘ₎ᵀ`.
pub fn gram_differences(p: &FactorPoint) -> [Matrix; 3] {
    let mut out = [Matrix::zeros(0, 0), Matrix::zeros(0, 0), Matrix::zeros(0, 0)];
    for m in 1..=3 {
        let mut d = p.factor(m).gram();
        let sg = p.s.flattening_gram(m).expect("valid mode");
        d.axpy(-1.0, &sg);
        out[m - 1] = d;
    }
    out
}

/// `φ = Σ_m ‖M Mᵀ − S₍ₘ₎ S₍ₘ₎ᵀ‖_F²`.
pub fn reg_phi(p: &FactorPoint) -> f64 {
    gram_differences(p)
        .iter()
        .map(|d| linalg::dot(d.data(), d.data()))
        .sum()
}

/// `R = φ²`.
pub fn reg(p: &FactorPoint) -> f64 {
    let phi = reg_phi(p);
    phi * phi
}

pub fn objective(p: &FactorPoint, t: &Tensor3, lambda: f64) -> Result<ObjectiveReport> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("lambda must be nonnegative, got {lambda}")));
    }
    let loss = loss(p, t)?;
    let phi = reg_phi(p);
    let reg = phi * phi;
    Ok(ObjectiveReport {
        loss,
        phi,
        reg,
        f: loss + lambda * reg,
        lambda,
    })
}

/// `X₍ₘ₎ Y₍ₘ₎ᵀ`, the contraction of all indices except mode `m`.
fn mode_contract(x: &Tensor3, y: &Tensor3, mode: usize) -> Matrix {
    if mode == 1 {
        let [n, _, _] = x.dims();
        let [k, _, _] = y.dims();
        let slab = x.len() / n.max(1);
        let mut out = Matrix::zeros(n, k);
        for i in 0..n {
            let xi = &x.data()[i * slab..(i + 1) * slab];
            for j in 0..k {
                out[(i, j)] = linalg::dot(xi, &y.data()[j * slab..(j + 1) * slab]);
            }
        }
        return out;
    }
    let xf = x.flatten(mode).expect("valid mode");
    let yf = y.flatten(mode).expect("valid mode");
    xf.mul_transpose(&yf)
}

/// `∇L` at `p`.
pub fn grad_loss(p: &FactorPoint, t: &Tensor3) -> Result<FactorPoint> {
    let e = residual(p, t)?;
    Ok(grad_loss_from_residual(p, &e))
}

fn grad_loss_from_residual(p: &FactorPoint, e: &Tensor3) -> FactorPoint {
    let (a, b, c) = (&p.a, &p.b, &p.c);
    let gs = e
        .transform([Some(&a.transpose()), Some(&b.transpose()), Some(&c.transpose())])
        .expect("shapes checked")
        .scale(2.0);
    let s_ibc = p.s.transform([None, Some(b), Some(c)]).expect("shapes checked");
    let s_aic = p.s.transform([Some(a), None, Some(c)]).expect("shapes checked");
    let s_abi = p.s.transform([Some(a), Some(b), None]).expect("shapes checked");
    FactorPoint {
        s: gs,
        a: mode_contract(&s_ibc, e, 1).scale(2.0),
        b: mode_contract(&s_aic, e, 2).scale(2.0),
        c: mode_contract(&s_abi, e, 3).scale(2.0),
    }
}

/// `∇φ` at `p`.
pub fn grad_phi(p: &FactorPoint) -> FactorPoint {
    let d = gram_differences(p);
    grad_phi_from(p, &d)
}

fn grad_phi_from(p: &FactorPoint, d: &[Matrix; 3]) -> FactorPoint {
    let mut gs = p.s.mode_product(0, &d[0]).expect("square");
    gs.axpy(1.0, &p.s.mode_product(1, &d[1]).expect("square"));
    gs.axpy(1.0, &p.s.mode_product(2, &d[2]).expect("square"));
    FactorPoint {
        s: gs.scale(-4.0),
        a: d[0].mul_unchecked(&p.a).scale(4.0),
        b: d[1].mul_unchecked(&p.b).scale(4.0),
        c: d[2].mul_unchecked(&p.c).scale(4.0),
    }
}

/// `∇R = 2φ·∇φ`.
pub fn grad_reg(p: &FactorPoint) -> FactorPoint {
    let d = gram_differences(p);
    let phi: f64 = d.iter().map(|m| linalg::dot(m.data(), m.data())).sum();
    grad_phi_from(p, &d).scale(2.0 * phi)
}

/// Objective value together with `∇L` and `∇R`.
#[derive(Debug, Clone)]
pub struct GradientParts {
    pub report: ObjectiveReport,
    pub grad_loss: FactorPoint,
    pub grad_reg: FactorPoint,
}

impl GradientParts {
    /// `∇f = ∇L + λ∇R`.
    pub fn grad_f(&self) -> FactorPoint {
        self.grad_loss.step(self.report.lambda, &self.grad_reg)
    }
}

pub fn gradient_parts(p: &FactorPoint, t: &Tensor3, lambda: f64) -> Result<GradientParts> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("lambda must be nonnegative, got {lambda}")));
    }
    let e = residual(p, t)?;
    let loss = linalg::dot(e.data(), e.data());
    let d = gram_differences(p);
    let phi: f64 = d.iter().map(|m| linalg::dot(m.data(), m.data())).sum();
    let reg = phi * phi;
    Ok(GradientParts {
        report: ObjectiveReport {
            loss,
            phi,
            reg,
            f: loss + lambda * reg,
            lambda,
        },
        grad_loss: grad_loss_from_residual(p, &e),
        grad_reg: grad_phi_from(p, &d).scale(2.0 * phi),
    })
}

/// Objective report and `∇f` in one pass.
pub fn value_and_grad(p: &FactorPoint, t: &Tensor3, lambda: f64) -> Result<(ObjectiveReport, FactorPoint)> {
    let parts = gradient_parts(p, t, lambda)?;
    let g = parts.grad_f();
    Ok((parts.report, g))
}

/// `∇f = ∇L + λ∇R`.
pub fn grad_f(p: &FactorPoint, t: &Tensor3, lambda: f64) -> Result<FactorPoint> {
    Ok(value_and_grad(p, t, lambda)?.1)
}

/// Default central-difference step `1e-5·(1+‖p‖)/‖dir‖`.
pub fn default_hvp_step(p: &FactorPoint, dir: &FactorPoint) -> f64 {
    1e-5 * (1.0 + p.norm_f()) / dir.norm_f()
}

/// Hessian-vector product `(∇f(p+h·dir) − ∇f(p−h·dir)) / 2h`. `h = None`
/// picks [`default_hvp_step`].
pub fn hvp(p: &FactorPoint, dir: &FactorPoint, t: &Tensor3, lambda: f64, h: Option<f64>) -> Result<FactorPoint> {
    p.check_same(dir)?;
    let dn = dir.norm_f();
    if dn == 0.0 || !dn.is_finite() {
        return Err(Error::ZeroDirection);
    }
    let h = h.unwrap_or_else(|| default_hvp_step(p, dir));
    let plus = grad_f(&p.step(h, dir), t, lambda)?;
    let minus = grad_f(&p.step(-h, dir), t, lambda)?;
    let mut out = plus;
    out.axpy(-1.0, &minus);
    out.scale_mut(0.5 / h);
    Ok(out)
}

/// `(ε, f(p + ε·dir))` for each `ε` in `steps`.
pub fn eval_along(p: &FactorPoint, dir: &FactorPoint, t: &Tensor3, lambda: f64, steps: &[f64]) -> Result<Vec<(f64, f64)>> {
    p.check_same(dir)?;
    steps
        .iter()
        .map(|&eps| Ok((eps, objective(&p.step(eps, dir), t, lambda)?.f)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, gaussian_vec, rng_from_seed, SeedRng};
    use crate::tensor::multilinear_transform;

    fn random_point(rng: &mut SeedRng, r: usize, d: usize) -> FactorPoint {
        FactorPoint::new(
            Tensor3::from_vec([r, r, r], gaussian_vec(rng, r * r * r)).unwrap(),
            gaussian_matrix(rng, r, d),
            gaussian_matrix(rng, r, d),
            gaussian_matrix(rng, r, d),
        )
        .unwrap()
    }

    fn random_tensor(rng: &mut SeedRng, d: usize) -> Tensor3 {
        Tensor3::from_vec([d, d, d], gaussian_vec(rng, d * d * d)).unwrap()
    }

    // Entrywise Gram-difference oracle.
    fn phi_oracle(p: &FactorPoint) -> f64 {
        let r = p.r();
        let s = p.s();
        let mut total = 0.0;
        for m in 1..=3 {
            let f = p.factor(m);
            for x in 0..r {
                for y in 0..r {
                    let mm: f64 = (0..f.cols()).map(|i| f[(x, i)] * f[(y, i)]).sum();
                    let mut ss = 0.0;
                    for u in 0..r {
                        for v in 0..r {
                            ss += match m {
                                1 => s[(x, u, v)] * s[(y, u, v)],
                                2 => s[(u, x, v)] * s[(u, y, v)],
                                _ => s[(u, v, x)] * s[(u, v, y)],
                            };
                        }
                    }
                    total += (mm - ss) * (mm - ss);
                }
            }
        }
        total
    }

    #[test]
    fn zero_point_values() {
        let mut rng = rng_from_seed(1);
        let t = random_tensor(&mut rng, 3);
        let p = FactorPoint::zeros(2, 3);
        assert!((loss(&p, &t).unwrap() - t.norm_f().powi(2)).abs() < 1e-12);
        assert_eq!(reg_phi(&p), 0.0);
    }

    #[test]
    fn loss_matches_recomputation() {
        let mut rng = rng_from_seed(2);
        let p = random_point(&mut rng, 2, 4);
        let t = random_tensor(&mut rng, 4);
        let x = multilinear_transform(p.s(), p.a(), p.b(), p.c()).unwrap();
        let direct = x.sub(&t).unwrap().norm_f().powi(2);
        assert!((loss(&p, &t).unwrap() - direct).abs() <= 1e-12 * (1.0 + direct));
    }

    #[test]
    fn phi_matches_oracle() {
        let mut rng = rng_from_seed(3);
        for _ in 0..5 {
            let p = random_point(&mut rng, 3, 4);
            let want = phi_oracle(&p);
            assert!((reg_phi(&p) - want).abs() <= 1e-12 * (1.0 + want));
        }
    }

    #[test]
    fn balanced_identity_point() {
        let mut s = Tensor3::zeros([2, 2, 2]);
        s[(0, 0, 0)] = 1.0;
        s[(1, 1, 1)] = 1.0;
        let i = Matrix::identity(2);
        let p = FactorPoint::new(s.clone(), i.clone(), i.clone(), i).unwrap();
        let rep = objective(&p, &s, default_lambda(2)).unwrap();
        assert_eq!(rep.f, 0.0);
        let g = grad_f(&p, &s, default_lambda(2)).unwrap();
        assert!(g.norm_f() < 1e-9);
    }

    #[test]
    fn report_invariants() {
        let mut rng = rng_from_seed(4);
        let p = random_point(&mut rng, 2, 3);
        let t = random_tensor(&mut rng, 3);
        let rep = objective(&p, &t, 0.25).unwrap();
        assert!((rep.reg - rep.phi * rep.phi).abs() <= 1e-12 * rep.reg);
        assert!((rep.f - (rep.loss + 0.25 * rep.reg)).abs() <= 1e-12 * rep.f);
        let rep0 = objective(&p, &t, 0.0).unwrap();
        assert_eq!(rep0.f, rep0.loss);
        assert!(objective(&p, &t, -1.0).is_err());
        assert_eq!(default_lambda(2), 1.0 / 256.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = rng_from_seed(5);
        let p = random_point(&mut rng, 2, 3).scale(0.5);
        let t = random_tensor(&mut rng, 3);
        let lambda = default_lambda(2);
        let g = grad_f(&p, &t, lambda).unwrap().to_vec();
        let x = p.to_vec();
        let h = 1e-5 * (1.0 + p.norm_f());
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fp = objective(&p.with_values(&xp).unwrap(), &t, lambda).unwrap().f;
            let fm = objective(&p.with_values(&xm).unwrap(), &t, lambda).unwrap().f;
            let fd = (fp - fm) / (2.0 * h);
            let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1.0);
            assert!(rel < 1e-6, "coordinate {i}: {} vs {}", g[i], fd);
        }
    }

    #[test]
    fn scalar_hvp_matches_hand_derivative() {
        // f = (s·a·b·c − t)², Hessian in s-direction: 2(abc)².
        let (s, a, b, c, t) = (0.7, 1.3, -0.4, 0.9, 0.2);
        let one = |v: f64| Matrix::from_vec(1, 1, alloc::vec![v]).unwrap();
        let p = FactorPoint::new(Tensor3::from_vec([1, 1, 1], alloc::vec![s]).unwrap(), one(a), one(b), one(c)).unwrap();
        let tt = Tensor3::from_vec([1, 1, 1], alloc::vec![t]).unwrap();
        let dir = p.with_values(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let hv = hvp(&p, &dir, &tt, 0.0, None).unwrap().to_vec();
        let abc = a * b * c;
        let res = s * abc - t;
        let want = [2.0 * abc * abc, 2.0 * (b * c) * (s * abc) + 2.0 * res * b * c, 2.0 * (a * c) * s * abc + 2.0 * res * a * c, 2.0 * (a * b) * s * abc + 2.0 * res * a * b];
        for (g, w) in hv.iter().zip(want) {
            assert!((g - w).abs() < 1e-4, "{g} vs {w}");
        }
    }

    #[test]
    fn hvp_is_symmetric_and_rejects_zero() {
        let mut rng = rng_from_seed(6);
        let p = random_point(&mut rng, 2, 3).scale(0.5);
        let t = random_tensor(&mut rng, 3);
        let u = random_point(&mut rng, 2, 3);
        let v = random_point(&mut rng, 2, 3);
        let lambda = default_lambda(2);
        let hu = hvp(&p, &u, &t, lambda, None).unwrap();
        let hv = hvp(&p, &v, &t, lambda, None).unwrap();
        let lhs = hu.inner(&v).unwrap();
        let rhs = hv.inner(&u).unwrap();
        assert!((lhs - rhs).abs() <= 1e-5 * u.norm_f() * v.norm_f());
        assert_eq!(hvp(&p, &p.zeros_like(), &t, lambda, None).unwrap_err(), Error::ZeroDirection);
    }

    #[test]
    fn eval_along_at_zero_reproduces_objective() {
        let mut rng = rng_from_seed(7);
        let p = random_point(&mut rng, 2, 3);
        let t = random_tensor(&mut rng, 3);
        let dir = random_point(&mut rng, 2, 3);
        let vals = eval_along(&p, &dir, &t, 0.1, &[0.0, 1e-3, 1e-2, 1e-1]).unwrap();
        assert_eq!(vals[0].1, objective(&p, &t, 0.1).unwrap().f);
        for &(eps, f) in &vals {
            let direct = objective(&p.step(eps, &dir), &t, 0.1).unwrap().f;
            assert!((f - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn vector_roundtrip_and_shape_errors() {
        let mut rng = rng_from_seed(8);
        let p = random_point(&mut rng, 2, 3);
        assert_eq!(p.with_values(&p.to_vec()).unwrap(), p);
        assert!(p.with_values(&[1.0]).is_err());
        assert!(p.add(&FactorPoint::zeros(2, 4)).is_err());
        assert!(loss(&p, &Tensor3::zeros([4, 4, 4])).is_err());
        assert!(FactorPoint::new(Tensor3::zeros([2, 2, 2]), Matrix::zeros(3, 3), Matrix::zeros(2, 3), Matrix::zeros(2, 3)).is_err());
    }
}
