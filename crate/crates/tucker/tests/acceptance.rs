//! Acceptance suite: one line per criterion, nonzero exit on any failure.
//!
//! Reference quantities are computed here from scratch wherever that is
//! practical (finite differences, naive index sums, the saddle
//! constructions) rather than taken from the library.

use std::process::Command;
use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;

use tucker_core::escape;
use tucker_core::objective::{self, default_lambda};
use tucker_core::random::{self, SeedRng};
use tucker_core::search::{self, DeltaGrid, Init, SearchConfig, PRACTICAL_SIGMA};
use tucker_core::subspace::{SubspaceSplit, DEFAULT_RANK_TOL};
use tucker_core::verify;
use tucker_core::{FactorPoint, Matrix, Tensor3};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn gaussian_tensor(rng: &mut SeedRng, dims: [usize; 3]) -> Tensor3 {
    Tensor3::from_vec(dims, random::gaussian_vec(rng, dims.iter().product())).unwrap()
}

fn unit_tensor(rng: &mut SeedRng, d: usize) -> Tensor3 {
    let g = gaussian_tensor(rng, [d, d, d]);
    g.scale(1.0 / g.norm_f())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least-squares slope of `ln y` against `ln x`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn unit_direction(rng: &mut SeedRng, like: &FactorPoint) -> FactorPoint {
    let v = random::gaussian_vec(rng, like.num_params());
    let n = dot(&v, &v).sqrt();
    like.with_values(&v.iter().map(|x| x / n).collect::<Vec<_>>()).unwrap()
}

fn gradient_fd() -> Outcome {
    let mut rng = random::rng_from_seed(101);
    let lambda = default_lambda(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let t = unit_tensor(&mut rng, 5);
        let p = verify::random_point(&mut rng, 2, 5);
        let g = objective::grad_f(&p, &t, lambda).unwrap().to_vec();
        let x = p.to_vec();
        let f_at = |v: &[f64]| objective::objective(&p.with_values(v).unwrap(), &t, lambda).unwrap().f;
        for i in 0..x.len() {
            let h = 1e-5 * x[i].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f_at(&xp) - f_at(&xm)) / (2.0 * h);
            let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1.0);
            worst = worst.max(rel);
        }
    }
    outcome(worst <= 1e-6, format!("max relative error {worst:.2e} over 20 instances"))
}

fn reg_orthogonality() -> Outcome {
    let mut rng = random::rng_from_seed(102);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let t = unit_tensor(&mut rng, 5);
        let p = verify::random_point(&mut rng, 2, 5);
        let gl = objective::grad_loss(&p, &t).unwrap();
        let gr = objective::grad_reg(&p);
        let ratio = gl.inner(&gr).unwrap().abs() / (1e-8 * (1.0 + gl.norm_f() * gr.norm_f()));
        worst = worst.max(ratio);
    }
    outcome(worst <= 1.0, format!("max |<gradL,gradR>| / allowed = {worst:.2e} over 100 points"))
}

fn euler_identity() -> Outcome {
    let mut rng = random::rng_from_seed(103);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let p = verify::random_point(&mut rng, 2, 5);
        let phi = objective::reg_phi(&p);
        let lhs = objective::grad_phi(&p).inner(&p).unwrap();
        worst = worst.max((4.0 * phi - lhs).abs() / (1e-8 * (1.0 + 4.0 * phi)));
    }
    outcome(worst <= 1.0, format!("max |4phi - <gradphi,p>| / allowed = {worst:.2e} over 100 points"))
}

fn reg_perturb() -> Outcome {
    let mut rng = random::rng_from_seed(104);
    let eps = geometric(1e-3, 1e-1, 9);
    let (mut lo, mut hi, mut used) = (f64::INFINITY, f64::NEG_INFINITY, 0);
    let mut bad = 0;
    for _ in 0..20 {
        let p = verify::balanced_point(&mut rng, 2, 5);
        let r0 = objective::reg(&p);
        if r0 > 1e-20 {
            bad += 1;
            continue;
        }
        let dir = unit_direction(&mut rng, &p);
        if objective::reg(&p.step(0.1, &dir)) <= 1e-14 {
            continue;
        }
        let rs: Vec<f64> = eps.iter().map(|&e| objective::reg(&p.step(e, &dir))).collect();
        let s = slope(&eps, &rs);
        used += 1;
        lo = lo.min(s);
        hi = hi.max(s);
        if !(3.5..=4.5).contains(&s) {
            bad += 1;
        }
    }
    outcome(
        bad == 0 && used > 0,
        format!("slopes in [{lo:.3}, {hi:.3}] on {used} of 20 points, {bad} outside [3.5, 4.5]"),
    )
}

fn desk_recovery() -> Outcome {
    let start = Instant::now();
    let results: Vec<(u64, f64, String)> = thread::scope(|scope| {
        let handles: Vec<_> = (0..20u64)
            .map(|s| {
                scope.spawn(move || {
                    let t = tucker::cli::generate_tensor(2, 8, 1000 + s, 0.0);
                    let mut cfg = SearchConfig::practical(2);
                    cfg.seed = s;
                    cfg.budget = 50_000;
                    cfg.init = Init::Zero;
                    let out = search::run(&t, &cfg).unwrap();
                    (s, out.report.f, out.status.label().to_string())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let secs = start.elapsed().as_secs_f64();
    let n = results.len() as f64;
    let within = |tol: f64| results.iter().filter(|r| r.1 <= tol).count() as f64 / n;
    let (r3, r2) = (within(1e-3), within(1e-2));
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let failures: Vec<String> = results
        .iter()
        .filter(|r| r.1 > 1e-3)
        .map(|r| format!("seed {} f={:.2e} ({})", r.0, r.1, r.2))
        .collect();
    let passed = r3 >= 0.9 && r2 >= 0.99 && secs < 600.0;
    let mut detail = format!(
        "{:.0}% reach f<=1e-3, {:.0}% reach f<=1e-2, worst f={worst:.2e}, {secs:.1}s",
        100.0 * r3,
        100.0 * r2
    );
    if !failures.is_empty() {
        detail.push_str(&format!("; misses: {}", failures.join(", ")));
    }
    outcome(passed, detail)
}

fn origin_escape() -> Outcome {
    let mut rng = random::rng_from_seed(106);
    let lambda = default_lambda(2);
    let t = unit_tensor(&mut rng, 4);
    let p = FactorPoint::zeros(2, 4);
    let grad = objective::grad_f(&p, &t, lambda).unwrap().norm_f();
    let mut curv: f64 = 0.0;
    for _ in 0..20 {
        let dir = unit_direction(&mut rng, &p);
        let q = objective::hvp(&p, &dir, &t, lambda, None).unwrap().inner(&dir).unwrap();
        curv = curv.max(q.abs());
    }
    let split = SubspaceSplit::new(&p, &t, PRACTICAL_SIGMA, DEFAULT_RANK_TOL).unwrap();
    let grid = DeltaGrid::default().steps(escape::delta_center(PRACTICAL_SIGMA, 3));
    let mut wins = 0;
    for _ in 0..100 {
        let sample = escape::sample_missing_directions(&split, [2, 2, 2], &mut rng).unwrap();
        let dir = escape::build_sampled_direction(&sample, PRACTICAL_SIGMA).unwrap();
        let best = escape::sign_flip_search(&p, &t, lambda, &dir, &grid).unwrap();
        let f0 = objective::objective(&p, &t, lambda).unwrap().f;
        let f1 = objective::objective(&p.step(best.step, &best.direction.delta), &t, lambda).unwrap().f;
        wins += usize::from(f1 < f0);
    }
    let rate = wins as f64 / 100.0;
    outcome(
        grad <= 1e-10 && curv <= 1e-8 && rate >= 0.3,
        format!("|grad f|={grad:.1e}, max |curvature|={curv:.1e}, improving samples {wins}/100"),
    )
}

/// Unit vector orthogonal to every vector in `against`.
fn orthogonal_unit(rng: &mut SeedRng, d: usize, against: &[&[f64]]) -> Vec<f64> {
    let mut v = random::gaussian_vec(rng, d);
    for a in against {
        let c = dot(&v, a) / dot(a, a);
        v.iter_mut().zip(a.iter()).for_each(|(x, y)| *x -= c * y);
    }
    let n = dot(&v, &v).sqrt();
    v.iter().map(|x| x / n).collect()
}

fn counterexample() -> Outcome {
    let mut rng = random::rng_from_seed(107);
    let unit = |rng: &mut SeedRng| orthogonal_unit(rng, 4, &[]);
    let (a_star, b_star, c_star) = (unit(&mut rng), unit(&mut rng), unit(&mut rng));
    let a = orthogonal_unit(&mut rng, 4, &[&a_star]);
    let b = orthogonal_unit(&mut rng, 4, &[&b_star]);
    let c = orthogonal_unit(&mut rng, 4, &[&c_star]);
    let t = Tensor3::outer(&a_star, &b_star, &c_star);
    let row = |v: &Vec<f64>| Matrix::from_rows(std::slice::from_ref(v)).unwrap();
    let p = FactorPoint::new(Tensor3::zeros([1, 1, 1]), row(&a), row(&b), row(&c)).unwrap();

    let gl = objective::grad_loss(&p, &t).unwrap().norm_f();
    let l0 = objective::loss(&p, &t).unwrap();
    let mut min_change = f64::INFINITY;
    for _ in 0..1000 {
        let dir = unit_direction(&mut rng, &p);
        min_change = min_change.min(objective::loss(&p.step(1e-2, &dir), &t).unwrap() - l0);
    }
    let lambda = 1.0 / 16.0;
    // S = 0 and unit rows give φ = 3, R = 9.
    let r = objective::reg(&p);
    let bound = 4.0 * lambda * r / p.norm_f() - 1e-10;
    let g = objective::grad_f(&p, &t, lambda).unwrap().norm_f();
    outcome(
        gl <= 1e-10 && min_change >= -1e-12 && g >= bound && bound > 0.0 && (r - 9.0).abs() < 1e-12,
        format!("|grad L|={gl:.1e}, min L change={min_change:.2e}, |grad f|={g:.4} >= {bound:.4}"),
    )
}

fn e(d: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[i] = 1.0;
    v
}

fn mat(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

/// Gallery saddles with `r = 2`, `d = 3`: (point, target, direction, order).
fn gallery() -> Vec<(FactorPoint, Tensor3, FactorPoint, f64)> {
    let (c1, c2) = (e(2, 0), e(2, 1));
    let (e1, e2) = (e(3, 0), e(3, 1));
    let z = vec![0.0; 3];
    let ident = mat(&[e1.clone(), e2.clone()]);
    let lone = mat(&[e1.clone(), z.clone()]);
    let c2e2 = mat(&[z.clone(), e2.clone()]);
    let zero = Matrix::zeros(2, 3);
    let mut out = Vec::new();

    // One missing: only the first factor lacks e2.
    let s = Tensor3::outer(&c1, &c1, &c1).add(&Tensor3::outer(&c1, &c2, &c2)).unwrap();
    let a = mat(&[e1.iter().map(|x| x * 2f64.sqrt()).collect(), z.clone()]);
    let p = FactorPoint::new(s, a, ident.clone(), ident.clone()).unwrap();
    let t = p.reconstruct().add(&Tensor3::outer(&e2, &e1, &e2)).unwrap();
    let dir = FactorPoint::new(Tensor3::outer(&c2, &c1, &c2), c2e2.clone(), zero.clone(), zero.clone()).unwrap();
    out.push((p, t, dir, 2.0));

    // Two missing.
    let p = FactorPoint::new(Tensor3::outer(&c1, &c1, &c1), lone.clone(), lone.clone(), lone.clone()).unwrap();
    let t = Tensor3::outer(&e1, &e1, &e1).add(&Tensor3::outer(&e2, &e2, &e1)).unwrap();
    let dir = FactorPoint::new(Tensor3::outer(&c2, &c2, &c1), c2e2.clone(), c2e2.clone(), zero.clone()).unwrap();
    out.push((p.clone(), t, dir, 3.0));

    // Three missing.
    let t = Tensor3::outer(&e1, &e1, &e1).add(&Tensor3::outer(&e2, &e2, &e2)).unwrap();
    let dir = FactorPoint::new(Tensor3::outer(&c2, &c2, &c2), c2e2.clone(), c2e2.clone(), c2e2).unwrap();
    out.push((p, t, dir, 4.0));
    out
}

fn saddle_orders() -> Outcome {
    let lambda = default_lambda(2);
    let steps = geometric(10f64.powf(-2.5), 0.1, 7);
    let mut ok = true;
    let mut slopes = Vec::new();
    for (p, t, dir, order) in gallery() {
        let f0 = objective::objective(&p, &t, lambda).unwrap().f;
        let gains: Vec<f64> = steps
            .iter()
            .map(|&s| f0 - objective::objective(&p.step(s, &dir), &t, lambda).unwrap().f)
            .collect();
        let k = slope(&steps, &gains);
        ok &= gains.iter().all(|g| *g > 0.0) && (k - order).abs() <= 0.5;
        slopes.push(format!("{k:.3} (want {order})"));
    }
    outcome(ok, format!("fitted exponents {}", slopes.join(", ")))
}

fn wedin() -> Outcome {
    let mut rng = random::stream(109, 6);
    let rep = verify::check_wedin(100, &mut rng);
    outcome(
        rep.failures == 0 && rep.trials == 100,
        format!("{} violations in {} splits, worst margin {:.2e}", rep.failures, rep.trials, rep.worst_margin),
    )
}

fn naive_transform(s: &Tensor3, m: [&Matrix; 3]) -> Tensor3 {
    let [r1, r2, r3] = s.dims();
    let dims = [m[0].cols(), m[1].cols(), m[2].cols()];
    let mut out = Tensor3::zeros(dims);
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let mut acc = 0.0;
                for x in 0..r1 {
                    for y in 0..r2 {
                        for z in 0..r3 {
                            acc += s[(x, y, z)] * m[0][(x, i)] * m[1][(y, j)] * m[2][(z, k)];
                        }
                    }
                }
                out[(i, j, k)] = acc;
            }
        }
    }
    out
}

fn naive_phi(p: &FactorPoint) -> f64 {
    let s = p.s();
    let [r1, r2, r3] = s.dims();
    let idx = |mode: usize, a: usize, u: usize, v: usize| match mode {
        0 => s[(a, u, v)],
        1 => s[(u, a, v)],
        _ => s[(u, v, a)],
    };
    let others = [(r2, r3), (r1, r3), (r1, r2)];
    let mut phi = 0.0;
    for (mode, m) in p.factors().into_iter().enumerate() {
        let (nu, nv) = others[mode];
        for a in 0..m.rows() {
            for b in 0..m.rows() {
                let mm: f64 = (0..m.cols()).map(|x| m[(a, x)] * m[(b, x)]).sum();
                let mut ss = 0.0;
                for u in 0..nu {
                    for v in 0..nv {
                        ss += idx(mode, a, u, v) * idx(mode, b, u, v);
                    }
                }
                phi += (mm - ss) * (mm - ss);
            }
        }
    }
    phi
}

fn brute_force() -> Outcome {
    let mut rng = random::rng_from_seed(110);
    let dim = |rng: &mut SeedRng| rng.random_range(1..=4usize);
    let mut worst = [0.0f64; 3];
    for _ in 0..50 {
        let ranks = [dim(&mut rng), dim(&mut rng), dim(&mut rng)];
        let dims = [dim(&mut rng), dim(&mut rng), dim(&mut rng)];
        let s = gaussian_tensor(&mut rng, ranks);
        let m: Vec<Matrix> = (0..3).map(|i| random::gaussian_matrix(&mut rng, ranks[i], dims[i])).collect();
        let t = gaussian_tensor(&mut rng, dims);
        let p = FactorPoint::new(s.clone(), m[0].clone(), m[1].clone(), m[2].clone()).unwrap();

        let oracle = naive_transform(&s, [&m[0], &m[1], &m[2]]);
        let got = tucker_core::tensor::multilinear_transform(&s, &m[0], &m[1], &m[2]).unwrap();
        for (g, o) in got.data().iter().zip(oracle.data()) {
            worst[0] = worst[0].max((g - o).abs() / (1e-12 * (1.0 + o.abs())));
        }
        let l_oracle: f64 = oracle.data().iter().zip(t.data()).map(|(x, y)| (x - y) * (x - y)).sum();
        let l = objective::loss(&p, &t).unwrap();
        worst[1] = worst[1].max((l - l_oracle).abs() / (1e-12 * (1.0 + l_oracle.abs())));
        let phi_oracle = naive_phi(&p);
        let phi = objective::reg_phi(&p);
        worst[2] = worst[2].max((phi - phi_oracle).abs() / (1e-12 * (1.0 + phi_oracle.abs())));
    }
    outcome(
        worst.iter().all(|w| *w <= 1.0),
        format!(
            "error / allowed: transform {:.2e}, loss {:.2e}, phi {:.2e}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let tensor = dir.path().join("t.json");
    let bin = env!("CARGO_BIN_EXE_tucker");
    let run = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    let t = tensor.to_str().unwrap();
    if run(&["generate", "--rank", "2", "--dim", "6", "--seed", "21", "--out", t]) != Some(0) {
        return outcome(false, "generate failed".into());
    }
    let mut codes = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        codes.push(run(&["decompose", t, "--rank", "2", "--seed", "5", "--out", out.to_str().unwrap()]));
    }
    let read = |run: &str, file: &str| std::fs::read(dir.path().join(run).join(file)).unwrap_or_default();
    let same_factors = read("a", "factors.json") == read("b", "factors.json") && !read("a", "factors.json").is_empty();
    let same_trace = read("a", "trace.jsonl") == read("b", "trace.jsonl") && !read("a", "trace.jsonl").is_empty();
    outcome(
        same_factors && same_trace && codes[0] == codes[1],
        format!(
            "factors identical: {same_factors}, trace identical: {same_trace}, exit codes {:?}",
            codes
        ),
    )
}

fn timed(limit: Option<Duration>, f: fn() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            out.passed = false;
            out.detail.push_str(&format!("; took {:.1}s, limit {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()));
        }
    }
    out
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria: [(Option<Duration>, fn() -> Outcome); 11] = [
        (secs(10), gradient_fd),
        (secs(5), reg_orthogonality),
        (None, euler_identity),
        (None, reg_perturb),
        (secs(600), desk_recovery),
        (None, origin_escape),
        (None, counterexample),
        (None, saddle_orders),
        (None, wedin),
        (None, brute_force),
        (None, determinism),
    ];
    let mut failed = 0;
    for (i, (limit, f)) in criteria.into_iter().enumerate() {
        let out = timed(limit, f);
        println!("criterion {} {}: {}", i + 1, if out.passed { "PASS" } else { "FAIL" }, out.detail);
        failed += usize::from(!out.passed);
    }
    if failed > 0 {
        println!("{failed} of 11 criteria failed");
        std::process::exit(1);
    }
    println!("all 11 criteria passed");
}
