//! Local search: second-order stationary points plus higher-order escape.
//!
//! [`run`] alternates two stages until `f ≤ ε`, the gradient budget runs
//! out, or no direction of improvement is found:
//!
//! 1. [`find_sosp`]: gradient descent with Barzilai–Borwein steps and
//!    Armijo backtracking. Near a stationary point it probes the Hessian
//!    for negative curvature and tries a small random perturbation; both
//!    are accepted only when they lower `f`.
//! 2. Escape: sampled missing-direction candidates for every block pattern,
//!    the core refit and extraneous-component removal. The best candidate is
//!    taken if it improves `f` by at least `min_improvement`.
//!
//! The budget counts gradient evaluations; a Hessian-vector product costs
//! two.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::escape::{self, DirectionKind, ImprovementDirection, SearchOutcome, MISSING_PATTERNS};
use crate::math;
use crate::objective::{self, FactorPoint, ObjectiveReport};
use crate::random::{self, SeedRng};
use crate::subspace::{SubspaceSplit, DEFAULT_RANK_TOL};
use crate::tensor::{self, Tensor3};

/// The full threshold schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub lambda: f64,
    pub k: f64,
    pub tau: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub kappa0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub epsilon: f64,
    pub c_gamma: f64,
}

impl Thresholds {
    /// Derived quantities for a given `τ`:
    /// `γ = c_γ τ^{1/48}`, `σ = κ₀ = √γ`, `κ₁ = 2Kσ^{3/4}`, `κ₂ = 2Kσ^{1/8}`,
    /// `κ₃ = 2Kσ^{1/2}`, `τ₁ = 4λτ/K`, `τ₂ = σ^{15/4}`.
    pub fn from_tau(epsilon: f64, r: usize, k: f64, tau: f64, c_gamma: f64) -> Self {
        let lambda = objective::default_lambda(r);
        let gamma = c_gamma * math::powf(tau, 1.0 / 48.0);
        let sigma = math::sqrt(gamma);
        Self {
            lambda,
            k,
            tau,
            gamma,
            sigma,
            kappa0: sigma,
            kappa1: 2.0 * k * math::powf(sigma, 0.75),
            kappa2: 2.0 * k * math::powf(sigma, 0.125),
            kappa3: 2.0 * k * math::powf(sigma, 0.5),
            tau1: 4.0 * lambda * tau / k,
            tau2: math::powf(sigma, 3.75),
            epsilon,
            c_gamma,
        }
    }

    /// `κ₂ > κ₃ > κ₁`, which holds whenever `σ < 1`.
    pub fn ordering_ok(&self) -> bool {
        self.kappa2 > self.kappa3 && self.kappa3 > self.kappa1
    }

    /// The five conditions on `τ` for dimension `d`.
    pub fn feasible(&self, d: usize) -> bool {
        let bound = math::sqrt(self.epsilon) / 4.0;
        let d = d as f64;
        let k = self.k;
        let s = self.sigma;
        self.kappa0 < bound
            && d * self.kappa1 + k * k * k * s < bound
            && d * self.kappa2 + k * k * s * s < bound
            && d * self.kappa3 + k * s * s * s < bound
            && self.tau < self.epsilon / 2.0
    }
}

/// Grid resolution in decades for the `τ` search.
const TAU_GRID_STEP: f64 = 0.25;
/// Smallest `log₁₀ τ` considered; stays inside the normal `f64` range.
const TAU_FLOOR_LOG10: f64 = -300.0;

/// Theory schedule with `c_γ = 1`.
pub fn schedule(epsilon: f64, r: usize, d: usize, k_est: f64) -> Result<Thresholds> {
    schedule_with(epsilon, r, d, k_est, 1.0)
}

/// Largest `τ = (ε/2)·10^{-n/4}` satisfying every condition of
/// [`Thresholds::feasible`].
pub fn schedule_with(epsilon: f64, r: usize, d: usize, k_est: f64, c_gamma: f64) -> Result<Thresholds> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if r == 0 || d == 0 || !(k_est > 0.0) || !(c_gamma > 0.0) {
        return Err(Error::InvalidArgument("rank, dimension, K and c_gamma must be positive".into()));
    }
    let start = math::log10(epsilon / 2.0);
    let mut n = 1usize;
    loop {
        let log_tau = start - TAU_GRID_STEP * n as f64;
        if log_tau < TAU_FLOOR_LOG10 {
            return Err(Error::InfeasibleSchedule(alloc::format!(
                "no tau above 1e{TAU_FLOOR_LOG10} satisfies the schedule for epsilon={epsilon}, d={d}, K={k_est}, \
                 c_gamma={c_gamma}; lower c_gamma or use practical mode"
            )));
        }
        let th = Thresholds::from_tau(epsilon, r, k_est, math::exp10(log_tau), c_gamma);
        if th.feasible(d) {
            return Ok(th);
        }
        n += 1;
    }
}

/// `⌈8·ln(1/ε)⌉`.
pub fn default_samples_per_block(epsilon: f64) -> usize {
    math::ceil(8.0 * math::ln(1.0 / epsilon)).max(1.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Theory,
    Practical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zero,
    Hosvd,
    /// Gaussian entries scaled by the given factor.
    Random(f64),
}

/// Geometric step grid `center·10^{-decades} … center·10^{decades}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaGrid {
    /// `None` uses the theory centres `σ^{1/4}` and `σ^{1/8}`.
    pub center: Option<f64>,
    pub points: usize,
    pub decades: f64,
}

impl Default for DeltaGrid {
    fn default() -> Self {
        Self {
            center: None,
            points: 13,
            decades: 2.0,
        }
    }
}

impl DeltaGrid {
    pub fn steps(&self, center: f64) -> Vec<f64> {
        let c = self.center.unwrap_or(center);
        if self.points <= 1 {
            return alloc::vec![c];
        }
        let n = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| c * math::exp10(-self.decades + 2.0 * self.decades * i as f64 / n))
            .collect()
    }
}

/// Tunables of the stationary point finder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SospOptions {
    /// Iterations over which progress is measured for stall detection.
    pub window: usize,
    /// Relative decrease of `f` over one window below which the run counts
    /// as stalled.
    pub stall_tol: f64,
    /// Power iterations for the curvature probe.
    pub curvature_iters: usize,
    /// Radius of the random perturbation tried at small gradients.
    pub perturb_radius: f64,
    /// Stop as soon as `f` reaches this value.
    pub target: f64,
}

impl Default for SospOptions {
    fn default() -> Self {
        Self {
            window: 100,
            stall_tol: 1e-3,
            curvature_iters: 30,
            perturb_radius: 1e-3,
            target: 0.0,
        }
    }
}

/// Search configuration. Fields left as `None` take mode defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub mode: Mode,
    pub rank: usize,
    pub lambda: Option<f64>,
    pub epsilon: f64,
    pub seed: u64,
    /// Maximum gradient evaluations.
    pub budget: usize,
    pub samples_per_block: Option<usize>,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    /// Singular-value split threshold.
    pub sigma: Option<f64>,
    pub min_improvement: Option<f64>,
    pub delta_grid: DeltaGrid,
    pub init: Init,
    /// Keep every `trace_stride`-th gradient record; other step kinds and
    /// the last step of each stationary point search are always kept.
    pub trace_stride: usize,
    /// Constant in `γ = c_γ τ^{1/48}` for theory mode.
    pub c_gamma: f64,
    pub sosp: SospOptions,
}

/// Practical-mode defaults.
pub const PRACTICAL_TAU1: f64 = 1e-6;
pub const PRACTICAL_TAU2: f64 = 1e-4;
pub const PRACTICAL_SIGMA: f64 = 1e-3;
pub const PRACTICAL_MIN_IMPROVEMENT: f64 = 1e-10;

impl SearchConfig {
    pub fn practical(rank: usize) -> Self {
        Self {
            mode: Mode::Practical,
            rank,
            lambda: None,
            epsilon: 1e-6,
            seed: 0,
            budget: 50_000,
            samples_per_block: None,
            tau1: None,
            tau2: None,
            sigma: None,
            min_improvement: None,
            delta_grid: DeltaGrid::default(),
            init: Init::Zero,
            trace_stride: 1,
            c_gamma: 1.0,
            sosp: SospOptions::default(),
        }
    }

    pub fn theory(rank: usize) -> Self {
        Self {
            mode: Mode::Theory,
            ..Self::practical(rank)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.rank == 0 {
            return bad("rank must be at least 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if self.budget == 0 {
            return bad("budget must be positive");
        }
        if self.trace_stride == 0 {
            return bad("trace stride must be positive");
        }
        if matches!(self.lambda, Some(l) if !(l >= 0.0)) {
            return bad("lambda must be nonnegative");
        }
        for (name, v) in [
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("sigma", self.sigma),
            ("min_improvement", self.min_improvement),
        ] {
            if matches!(v, Some(x) if !(x > 0.0)) {
                return Err(Error::InvalidArgument(alloc::format!("{name} must be positive")));
            }
        }
        if matches!(self.samples_per_block, Some(0)) {
            return bad("samples per block must be positive");
        }
        if matches!(self.init, Init::Random(s) if !(s > 0.0)) {
            return bad("random init scale must be positive");
        }
        if self.delta_grid.points == 0 || !(self.delta_grid.decades >= 0.0) {
            return bad("delta grid needs at least one point and nonnegative span");
        }
        Ok(())
    }
}

/// Parameters after mode defaults are applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedParams {
    pub lambda: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub sigma: f64,
    pub min_improvement: f64,
    pub samples_per_block: usize,
    pub thresholds: Option<Thresholds>,
}

pub fn resolve(config: &SearchConfig, t: &Tensor3) -> Result<ResolvedParams> {
    config.validate()?;
    let dims = t.dims();
    for (m, &d) in dims.iter().enumerate() {
        if config.rank > d {
            return Err(Error::RankTooLarge {
                rank: config.rank,
                dim: d,
                mode: m + 1,
            });
        }
    }
    let samples_per_block = config
        .samples_per_block
        .unwrap_or_else(|| default_samples_per_block(config.epsilon));
    let lambda = config.lambda.unwrap_or_else(|| objective::default_lambda(config.rank));
    match config.mode {
        Mode::Practical => Ok(ResolvedParams {
            lambda,
            tau1: config.tau1.unwrap_or(PRACTICAL_TAU1),
            tau2: config.tau2.unwrap_or(PRACTICAL_TAU2),
            sigma: config.sigma.unwrap_or(PRACTICAL_SIGMA),
            min_improvement: config.min_improvement.unwrap_or(PRACTICAL_MIN_IMPROVEMENT),
            samples_per_block,
            thresholds: None,
        }),
        Mode::Theory => {
            let d = dims.iter().copied().max().unwrap_or(1);
            let k = t.norm_f().max(1.0);
            let th = schedule_with(config.epsilon, config.rank, d, k, config.c_gamma)?;
            // Improvement promised for three missing directions, the
            // weakest of the escape guarantees.
            let min_improvement = math::powf(th.sigma, 15.0 / 8.0) * 1e-3;
            Ok(ResolvedParams {
                lambda,
                tau1: config.tau1.unwrap_or(th.tau1),
                tau2: config.tau2.unwrap_or(th.tau2),
                sigma: config.sigma.unwrap_or(th.sigma),
                min_improvement: config.min_improvement.unwrap_or(min_improvement),
                samples_per_block,
                thresholds: Some(th),
            })
        }
    }
}

/// What an accepted step was.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Init,
    Gradient,
    Perturbation,
    NegativeCurvature,
    Sampled([usize; 3]),
    CoreFix,
    RemoveExtraneous(usize),
}

impl StepKind {
    pub fn label(&self) -> String {
        match self {
            StepKind::Init => "init".into(),
            StepKind::Gradient => "gradient".into(),
            StepKind::Perturbation => "perturbation".into(),
            StepKind::NegativeCurvature => "negative-curvature".into(),
            StepKind::Sampled([i, j, k]) => alloc::format!("sampled({i},{j},{k})"),
            StepKind::CoreFix => "core-fix".into(),
            StepKind::RemoveExtraneous(m) => alloc::format!("remove-extraneous({m})"),
        }
    }

    fn from_direction(kind: DirectionKind) -> Self {
        match kind {
            DirectionKind::RemoveExtraneous(m) => StepKind::RemoveExtraneous(m),
            DirectionKind::CoreFix => StepKind::CoreFix,
            DirectionKind::Sampled(p) => StepKind::Sampled(p),
            DirectionKind::Gradient => StepKind::Gradient,
            DirectionKind::NegativeCurvature => StepKind::NegativeCurvature,
        }
    }
}

/// One trace entry, describing the state after the step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub f: f64,
    pub loss: f64,
    pub reg: f64,
    /// `‖∇f‖` at the point before the step (`None` if not computed).
    pub grad_norm: Option<f64>,
    pub min_curvature: Option<f64>,
    pub step: StepKind,
    pub step_size: f64,
    pub improvement: f64,
    pub grad_evals: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchTrace {
    pub records: Vec<TraceRecord>,
}

impl SearchTrace {
    /// `true` when `f` never increases from one record to the next.
    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].f <= w[0].f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SospStatus {
    /// `‖∇f‖ ≤ τ₁` and no curvature below `−τ₂` was found.
    Stationary,
    /// Progress over the stall window fell below the tolerance.
    Stalled,
    /// `f` reached the target value.
    Target,
    Budget,
}

/// Accepted step inside [`find_sosp`].
#[derive(Debug, Clone, PartialEq)]
pub struct SospEvent {
    pub kind: StepKind,
    pub report: ObjectiveReport,
    pub grad_norm: f64,
    pub min_curvature: Option<f64>,
    pub step_size: f64,
    pub improvement: f64,
    pub grad_evals: usize,
}

#[derive(Debug, Clone)]
pub struct SospResult {
    pub point: FactorPoint,
    pub report: ObjectiveReport,
    pub grad_norm: f64,
    pub min_curvature: Option<f64>,
    pub status: SospStatus,
    pub grad_evals: usize,
    pub events: Vec<SospEvent>,
}

/// Outcome of the curvature probe.
#[derive(Debug, Clone)]
pub struct CurvatureProbe {
    /// Unit direction with Rayleigh quotient at most `−τ₂/2`, if found.
    pub direction: Option<FactorPoint>,
    /// Smallest Rayleigh quotient seen.
    pub min_curvature: f64,
    pub hvps: usize,
}

/// Power iteration on `cI − H`, with `c = 1.5·μ + τ₂` where `μ` estimates
/// `‖H‖` from a few power steps on `H`.
pub fn probe_curvature<R: Rng + ?Sized>(
    p: &FactorPoint,
    t: &Tensor3,
    lambda: f64,
    tau2: f64,
    iters: usize,
    rng: &mut R,
) -> Result<CurvatureProbe> {
    let n = p.num_params();
    let mut hvps = 0usize;
    let hv = |x: &FactorPoint, hvps: &mut usize| -> Result<FactorPoint> {
        *hvps += 1;
        objective::hvp(p, x, t, lambda, None)
    };
    let unit = |rng: &mut R| p.with_values(&random::unit_vec(rng, n));

    let mut x = unit(rng)?;
    let mut mu: f64 = 0.0;
    for _ in 0..8 {
        let y = hv(&x, &mut hvps)?;
        let ny = y.norm_f();
        mu = mu.max(ny);
        if ny == 0.0 || !ny.is_finite() {
            break;
        }
        x = y.scale(1.0 / ny);
    }
    let shift = 1.5 * mu + tau2;

    let mut y = unit(rng)?;
    let mut best_q = f64::INFINITY;
    let mut best_dir = y.clone();
    for _ in 0..iters.max(1) {
        let hy = hv(&y, &mut hvps)?;
        let q = hy.inner_unchecked(&y);
        if q < best_q {
            best_q = q;
            best_dir = y.clone();
        }
        let mut z = y.scale(shift);
        z.axpy(-1.0, &hy);
        let nz = z.norm_f();
        if nz == 0.0 || !nz.is_finite() {
            break;
        }
        y = z.scale(1.0 / nz);
    }
    let found = best_q <= -tau2 / 2.0;
    Ok(CurvatureProbe {
        direction: found.then_some(best_dir),
        min_curvature: best_q,
        hvps,
    })
}

/// Unit direction of curvature at most `−τ₂/2`, if power iteration finds
/// one.
pub fn negative_curvature_direction<R: Rng + ?Sized>(
    p: &FactorPoint,
    t: &Tensor3,
    lambda: f64,
    tau2: f64,
    iters: usize,
    rng: &mut R,
) -> Result<Option<FactorPoint>> {
    Ok(probe_curvature(p, t, lambda, tau2, iters, rng)?.direction)
}

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

fn line_grid() -> Vec<f64> {
    (0..13).map(|i| math::exp10(-4.0 + i as f64 / 3.0)).collect()
}

/// Best `f(p + α·dir)` over `±dir` and a geometric step grid.
fn best_along(p: &FactorPoint, dir: &FactorPoint, t: &Tensor3, lambda: f64, scale: f64, f0: f64) -> Result<Option<(FactorPoint, ObjectiveReport, f64)>> {
    let mut best: Option<(FactorPoint, ObjectiveReport, f64)> = None;
    let mut best_f = f0;
    for sign in [1.0, -1.0] {
        for alpha in line_grid() {
            let step = sign * alpha * scale;
            let q = p.step(step, dir);
            let rep = objective::objective(&q, t, lambda)?;
            if rep.f < best_f {
                best_f = rep.f;
                best = Some((q, rep, step));
            }
        }
    }
    Ok(best)
}

/// Second-order stationary point search with default options.
pub fn find_sosp(
    p0: &FactorPoint,
    t: &Tensor3,
    lambda: f64,
    tau1: f64,
    tau2: f64,
    budget: usize,
    rng: &mut SeedRng,
) -> Result<SospResult> {
    find_sosp_with(p0, t, lambda, tau1, tau2, budget, &SospOptions::default(), rng)
}

#[allow(clippy::too_many_arguments)]
pub fn find_sosp_with<R: Rng + ?Sized>(
    p0: &FactorPoint,
    t: &Tensor3,
    lambda: f64,
    tau1: f64,
    tau2: f64,
    budget: usize,
    opts: &SospOptions,
    rng: &mut R,
) -> Result<SospResult> {
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be positive".into()));
    }
    let mut p = p0.clone();
    let mut evals = 0usize;
    let mut events = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut prev: Option<(FactorPoint, FactorPoint)> = None;
    let mut alpha = 1e-2;
    let mut perturbed_here = false;
    let mut force_check = false;

    loop {
        let (rep, g) = objective::value_and_grad(&p, t, lambda)?;
        evals += 1;
        if !rep.f.is_finite() || !g.is_finite() {
            return Err(Error::NonFinite { iteration: evals });
        }
        let gnorm = g.norm_f();
        let finish = |p: FactorPoint, status, curv, evals, events| SospResult {
            point: p,
            report: rep,
            grad_norm: gnorm,
            min_curvature: curv,
            status,
            grad_evals: evals,
            events,
        };
        if rep.f <= opts.target {
            return Ok(finish(p, SospStatus::Target, None, evals, events));
        }
        if evals >= budget {
            return Ok(finish(p, SospStatus::Budget, None, evals, events));
        }

        history.push(rep.f);
        let stalled = force_check || history.len() > opts.window && {
            let old = history[history.len() - 1 - opts.window];
            old - rep.f <= opts.stall_tol * rep.f.abs()
        };

        if gnorm <= tau1 || stalled {
            force_check = false;
            // Probe second-order information before giving up.
            let probe = probe_curvature(&p, t, lambda, tau2, opts.curvature_iters, rng)?;
            evals += 2 * probe.hvps;
            if let Some(dir) = probe.direction {
                if let Some((q, qrep, step)) = best_along(&p, &dir, t, lambda, 1.0, rep.f)? {
                    events.push(SospEvent {
                        kind: StepKind::NegativeCurvature,
                        report: qrep,
                        grad_norm: gnorm,
                        min_curvature: Some(probe.min_curvature),
                        step_size: step.abs(),
                        improvement: rep.f - qrep.f,
                        grad_evals: evals,
                    });
                    p = q;
                    prev = None;
                    history.clear();
                    perturbed_here = false;
                    continue;
                }
            }
            if !perturbed_here {
                perturbed_here = true;
                let n = p.num_params();
                let dir = p.with_values(&random::unit_vec(rng, n))?;
                let radius = opts.perturb_radius * (1.0 + p.norm_f());
                if let Some((q, qrep, step)) = best_along(&p, &dir, t, lambda, radius, rep.f)? {
                    events.push(SospEvent {
                        kind: StepKind::Perturbation,
                        report: qrep,
                        grad_norm: gnorm,
                        min_curvature: Some(probe.min_curvature),
                        step_size: step.abs(),
                        improvement: rep.f - qrep.f,
                        grad_evals: evals,
                    });
                    p = q;
                    prev = None;
                    history.clear();
                    continue;
                }
            }
            let status = if gnorm <= tau1 {
                SospStatus::Stationary
            } else {
                SospStatus::Stalled
            };
            return Ok(finish(p, status, Some(probe.min_curvature), evals, events));
        }

        // Barzilai–Borwein step from the previous iterate.
        if let Some((pp, pg)) = &prev {
            let s = p.sub(pp)?;
            let y = g.sub(pg)?;
            let sy = s.inner_unchecked(&y);
            let ss = s.inner_unchecked(&s);
            alpha = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e6) } else { (alpha * 2.0).min(1e6) };
        }
        let g2 = gnorm * gnorm;
        let mut step = alpha;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let q = p.step(-step, &g);
            let qrep = objective::objective(&q, t, lambda)?;
            if qrep.f.is_finite() && qrep.f <= rep.f - ARMIJO_C * step * g2 {
                accepted = Some((q, qrep));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((q, qrep)) => {
                events.push(SospEvent {
                    kind: StepKind::Gradient,
                    report: qrep,
                    grad_norm: gnorm,
                    min_curvature: None,
                    step_size: step,
                    improvement: rep.f - qrep.f,
                    grad_evals: evals,
                });
                prev = Some((p, g));
                p = q;
                alpha = step;
                perturbed_here = false;
            }
            None => {
                // No descent at machine precision: the point is as
                // stationary as the arithmetic allows.
                force_check = true;
                prev = None;
            }
        }
    }
}

/// Why [`run`] stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    Budget,
    NoDirection,
    Failed,
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::Budget => "budget",
            RunStatus::NoDirection => "no-direction",
            RunStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub point: FactorPoint,
    pub report: ObjectiveReport,
    pub trace: SearchTrace,
    pub status: RunStatus,
    pub error: Option<Error>,
    pub grad_evals: usize,
    pub outer_iterations: usize,
    /// Largest parameter norm seen along the trajectory.
    pub k_max: f64,
    pub params: ResolvedParams,
}

/// RNG stream identifiers derived from the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_SAMPLER: u64 = 1;
const STREAM_SOSP: u64 = 2;

pub fn initial_point(t: &Tensor3, config: &SearchConfig) -> Result<FactorPoint> {
    let r = config.rank;
    let dims = t.dims();
    match config.init {
        Init::Zero => Ok(FactorPoint::zeros_shaped([r, r, r], dims)),
        Init::Hosvd => tensor::hosvd(t, r),
        Init::Random(scale) => {
            let mut rng = random::stream(config.seed, STREAM_INIT);
            let template = FactorPoint::zeros_shaped([r, r, r], dims);
            let v: Vec<f64> = random::gaussian_vec(&mut rng, template.num_params())
                .into_iter()
                .map(|x| x * scale)
                .collect();
            template.with_values(&v)
        }
    }
}

/// Best escape candidate at `p`, or `None` if nothing lowers `f`.
pub fn best_escape<R: Rng + ?Sized>(
    p: &FactorPoint,
    t: &Tensor3,
    params: &ResolvedParams,
    grid: &DeltaGrid,
    rng: &mut R,
) -> Result<Option<SearchOutcome>> {
    let split = SubspaceSplit::new(p, t, params.sigma, DEFAULT_RANK_TOL)?;
    let mut best: Option<SearchOutcome> = None;
    let mut consider = |cand: SearchOutcome| {
        if cand.improvement > 0.0 && best.as_ref().is_none_or(|b| cand.improvement > b.improvement) {
            best = Some(cand);
        }
    };
    for pattern in MISSING_PATTERNS {
        let missing = pattern.iter().filter(|&&x| x == 2).count();
        let steps = grid.steps(escape::delta_center(params.sigma, missing));
        for _ in 0..params.samples_per_block {
            let sample = match escape::sample_missing_directions(&split, pattern, rng) {
                Ok(s) => s,
                Err(Error::NoMissingDirection(_)) => break,
                Err(e) => return Err(e),
            };
            let dir = escape::build_sampled_direction(&sample, params.sigma)?;
            consider(escape::sign_flip_search(p, t, params.lambda, &dir, &steps)?);
        }
    }
    let grid = line_grid();
    let mut fixed: Vec<ImprovementDirection> = Vec::new();
    match escape::core_fix_direction(p, t, &split) {
        Ok(d) => fixed.push(d),
        Err(Error::NoDirection(_) | Error::ZeroDirection) => {}
        Err(e) => return Err(e),
    }
    for mode in 1..=3 {
        match escape::remove_extraneous_direction(p, &split, mode) {
            Ok(d) => fixed.push(d),
            Err(Error::NoDirection(_)) => {}
            Err(e) => return Err(e),
        }
    }
    for dir in &fixed {
        consider(escape::line_search(p, t, params.lambda, dir, &grid)?);
    }
    Ok(best)
}

/// The full local search.
pub fn run(t: &Tensor3, config: &SearchConfig) -> Result<RunOutcome> {
    if !t.is_finite() {
        return Err(Error::InvalidArgument("tensor has non-finite entries".into()));
    }
    let params = resolve(config, t)?;
    let p0 = initial_point(t, config)?;
    let mut sampler_rng = random::stream(config.seed, STREAM_SAMPLER);
    let mut sosp_rng = random::stream(config.seed, STREAM_SOSP);
    let lambda = params.lambda;

    let rep0 = objective::objective(&p0, t, lambda)?;
    let mut out = RunOutcome {
        point: p0,
        report: rep0,
        trace: SearchTrace::default(),
        status: RunStatus::Budget,
        error: None,
        grad_evals: 0,
        outer_iterations: 0,
        k_max: 0.0,
        params,
    };
    out.k_max = out.point.norm_f();
    let seed = config.seed;
    let mut iteration = 0usize;
    let mut gradient_steps = 0usize;
    let push = |trace: &mut SearchTrace, iteration: &mut usize, rec: TraceRecord| {
        trace.records.push(TraceRecord {
            iteration: *iteration,
            ..rec
        });
        *iteration += 1;
    };
    push(
        &mut out.trace,
        &mut iteration,
        TraceRecord {
            iteration: 0,
            f: rep0.f,
            loss: rep0.loss,
            reg: rep0.reg,
            grad_norm: None,
            min_curvature: None,
            step: StepKind::Init,
            step_size: 0.0,
            improvement: 0.0,
            grad_evals: 0,
            seed,
        },
    );

    let mut sosp_opts = config.sosp;
    sosp_opts.target = config.epsilon;
    let base_window = sosp_opts.window;

    loop {
        if out.report.f <= config.epsilon {
            out.status = RunStatus::Converged;
            break;
        }
        if out.grad_evals >= config.budget {
            out.status = RunStatus::Budget;
            break;
        }
        out.outer_iterations += 1;
        let remaining = config.budget - out.grad_evals;
        let sosp = match find_sosp_with(&out.point, t, lambda, params.tau1, params.tau2, remaining, &sosp_opts, &mut sosp_rng) {
            Ok(s) => s,
            Err(e) => {
                out.status = RunStatus::Failed;
                out.error = Some(e);
                break;
            }
        };
        let base_evals = out.grad_evals;
        let last = sosp.events.len().saturating_sub(1);
        for (idx, ev) in sosp.events.iter().enumerate() {
            let keep = ev.kind != StepKind::Gradient || {
                gradient_steps += 1;
                gradient_steps % config.trace_stride == 0
            } || idx == last;
            if keep {
                push(
                    &mut out.trace,
                    &mut iteration,
                    TraceRecord {
                        iteration: 0,
                        f: ev.report.f,
                        loss: ev.report.loss,
                        reg: ev.report.reg,
                        grad_norm: Some(ev.grad_norm),
                        min_curvature: ev.min_curvature,
                        step: ev.kind,
                        step_size: ev.step_size,
                        improvement: ev.improvement,
                        grad_evals: base_evals + ev.grad_evals,
                        seed,
                    },
                );
            } else {
                iteration += 1;
            }
        }
        out.grad_evals += sosp.grad_evals;
        out.point = sosp.point;
        out.report = sosp.report;
        out.k_max = out.k_max.max(out.point.norm_f());
        match sosp.status {
            SospStatus::Target => {
                out.status = RunStatus::Converged;
                break;
            }
            SospStatus::Budget => {
                out.status = RunStatus::Budget;
                break;
            }
            SospStatus::Stationary | SospStatus::Stalled => {}
        }

        let escape = match best_escape(&out.point, t, &params, &config.delta_grid, &mut sampler_rng) {
            Ok(e) => e,
            Err(e) => {
                out.status = RunStatus::Failed;
                out.error = Some(e);
                break;
            }
        };
        match escape {
            Some(best) if best.improvement >= params.min_improvement => {
                let q = out.point.step(best.step, &best.direction.delta);
                let rep = objective::objective(&q, t, lambda)?;
                push(
                    &mut out.trace,
                    &mut iteration,
                    TraceRecord {
                        iteration: 0,
                        f: rep.f,
                        loss: rep.loss,
                        reg: rep.reg,
                        grad_norm: Some(sosp.grad_norm),
                        min_curvature: sosp.min_curvature,
                        step: StepKind::from_direction(best.direction.kind),
                        step_size: best.step,
                        improvement: out.report.f - rep.f,
                        grad_evals: out.grad_evals,
                        seed,
                    },
                );
                out.point = q;
                out.report = rep;
                out.k_max = out.k_max.max(out.point.norm_f());
                sosp_opts.window = base_window;
            }
            _ if sosp.status == SospStatus::Stalled => {
                // Not yet stationary: keep descending, judging progress
                // over a longer horizon.
                sosp_opts.window = sosp_opts.window.saturating_mul(2);
            }
            _ => {
                out.status = RunStatus::NoDirection;
                break;
            }
        }
    }
    Ok(out)
}
