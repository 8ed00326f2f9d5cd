//! `tucker generate | decompose | verify`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use tucker_core::objective;
use tucker_core::random;
use tucker_core::search::{self, RunOutcome, RunStatus};
use tucker_core::verify;
use tucker_core::Tensor3;

use crate::config::{InitSpec, ModeName, RunConfig};
use crate::error::{CliError, Result};
use crate::io;
use crate::report::{self, Summary, VerifyReport};

pub const EXIT_OK: i32 = 0;
/// Run failed internally or a verification check failed.
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_NO_DIRECTION: i32 = 3;
pub const EXIT_INPUT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "tucker", version, about = "Tucker decomposition by regularized local search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded exact-rank tensor with unit Frobenius norm.
    Generate(GenerateArgs),
    /// Run the local search on a tensor file.
    Decompose(DecomposeArgs),
    /// Run the verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub rank: usize,
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Frobenius norm of additive Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value = "tensor.json")]
    pub out: PathBuf,
    /// Write the binary TKR1 format instead of JSON.
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Tensor file (JSON or TKR1).
    pub tensor: PathBuf,
    /// JSON run configuration; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeName>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// zero | hosvd | random:<scale>
    #[arg(long)]
    pub init: Option<InitSpec>,
    /// Maximum gradient evaluations per restart.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub samples_per_block: Option<usize>,
    #[arg(long)]
    pub tau1: Option<f64>,
    #[arg(long)]
    pub tau2: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub min_improvement: Option<f64>,
    #[arg(long)]
    pub c_gamma: Option<f64>,
    #[arg(long)]
    pub delta_center: Option<f64>,
    #[arg(long)]
    pub delta_points: Option<usize>,
    #[arg(long)]
    pub delta_decades: Option<f64>,
    #[arg(long)]
    pub trace_stride: Option<usize>,
    /// Independent runs with seeds `seed, seed+1, ...`, run in parallel.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only these checks (repeatable).
    #[arg(long = "check", value_parser = clap::builder::PossibleValuesParser::new(verify::SUITE))]
    pub checks: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "verify-report.json")]
    pub out: PathBuf,
    /// Negative control: perturb ∇L along ∇R before the orthogonality check.
    #[arg(long, hide = true)]
    pub corrupt_gradient: bool,
}

impl DecomposeArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        macro_rules! set_opt {
            ($($field:ident),*) => {$(
                if self.$field.is_some() {
                    cfg.$field = self.$field;
                }
            )*};
        }
        set!(mode, seed, epsilon, init, budget, c_gamma, trace_stride, restarts, out);
        set_opt!(rank, dim, lambda, samples_per_block, tau1, tau2, sigma, min_improvement);
        if self.delta_center.is_some() {
            cfg.delta_grid.center = self.delta_center;
        }
        if let Some(p) = self.delta_points {
            cfg.delta_grid.points = p;
        }
        if let Some(d) = self.delta_decades {
            cfg.delta_grid.decades = d;
        }
        Ok(cfg)
    }
}

pub fn status_code(status: RunStatus) -> i32 {
    match status {
        RunStatus::Converged => EXIT_OK,
        RunStatus::Budget => EXIT_BUDGET,
        RunStatus::NoDirection => EXIT_NO_DIRECTION,
        RunStatus::Failed => EXIT_FAILED,
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    if args.rank == 0 {
        return Err(CliError::Config("rank must be at least 1".into()));
    }
    if args.rank > args.dim {
        return Err(tucker_core::Error::RankTooLarge {
            rank: args.rank,
            dim: args.dim,
            mode: 1,
        }
        .into());
    }
    if !(args.noise >= 0.0 && args.noise.is_finite()) {
        return Err(CliError::Config(format!("noise must be a nonnegative number, got {}", args.noise)));
    }
    let t = generate_tensor(args.rank, args.dim, args.seed, args.noise);
    if args.binary {
        io::write_tensor_binary(&args.out, &t)
    } else {
        let meta = json!({
            "r": args.rank,
            "d": args.dim,
            "seed": args.seed,
            "noise": args.noise,
            "exact": args.noise == 0.0,
        });
        io::write_tensor_json(&args.out, &t, Some(meta))
    }
}

/// Unit-norm exact-rank tensor from `seed`, plus Gaussian noise of
/// Frobenius norm `noise` drawn from a separate stream.
pub fn generate_tensor(r: usize, d: usize, seed: u64, noise: f64) -> Tensor3 {
    let mut t = random::exact_rank_instance(&mut random::rng_from_seed(seed), r, d);
    if noise > 0.0 {
        let mut rng = random::stream(seed, 1);
        let g = Tensor3::from_vec([d, d, d], random::gaussian_vec(&mut rng, d * d * d)).expect("sized");
        let n = g.norm_f();
        if n > 0.0 {
            t.axpy(noise / n, &g);
        }
    }
    t
}

fn suffixed(dir: &Path, stem: &str, ext: &str, restart: Option<usize>) -> PathBuf {
    match restart {
        Some(i) => dir.join(format!("{stem}.{i}.{ext}")),
        None => dir.join(format!("{stem}.{ext}")),
    }
}

/// Runs every restart and writes `factors`, `trace` and `summary` files.
/// Returns the summaries in restart order.
pub fn cmd_decompose(args: &DecomposeArgs) -> Result<Vec<Summary>> {
    let cfg = args.resolve()?;
    let (t, _) = io::read_tensor(&args.tensor)?;
    let dims = t.dims();
    if let Some(d) = cfg.dim {
        if dims != [d; 3] {
            return Err(CliError::Config(format!("--dim {d} does not match tensor dims {dims:?}")));
        }
    }
    let searches = (0..cfg.restarts)
        .map(|i| cfg.search_config(i))
        .collect::<Result<Vec<_>>>()?;
    if let Some(m) = (0..3).find(|&m| searches[0].rank > dims[m]) {
        return Err(tucker_core::Error::RankTooLarge {
            rank: searches[0].rank,
            dim: dims[m],
            mode: m + 1,
        }
        .into());
    }
    // Check the schedule before spending time on restarts.
    search::resolve(&searches[0], &t)?;

    let outcomes: Vec<(tucker_core::Result<RunOutcome>, f64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = searches
            .iter()
            .map(|sc| {
                let t = &t;
                scope.spawn(move || {
                    let start = Instant::now();
                    let out = search::run(t, sc);
                    (out, start.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("search thread panicked")).collect()
    });

    let multi = cfg.restarts > 1;
    let mut summaries = Vec::with_capacity(outcomes.len());
    for (i, ((out, secs), sc)) in outcomes.into_iter().zip(&searches).enumerate() {
        let out = out?;
        let tag = multi.then_some(i);
        io::write_factors(&suffixed(&cfg.out, "factors", "json", tag), &out.point)?;
        io::write_bytes(&suffixed(&cfg.out, "trace", "jsonl", tag), &report::trace_jsonl(&out.trace.records))?;
        let summary = Summary::new(&out, &t, &cfg, i, sc.seed, secs);
        io::write_bytes(&suffixed(&cfg.out, "summary", "json", tag), &io::to_json_bytes(&summary))?;
        summaries.push(summary);
    }
    Ok(summaries)
}

/// Exit code of the best restart (lowest `f`).
pub fn decompose_code(summaries: &[Summary]) -> i32 {
    summaries
        .iter()
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .map(|s| match s.status {
            "converged" => EXIT_OK,
            "budget" => EXIT_BUDGET,
            "no-direction" => EXIT_NO_DIRECTION,
            _ => EXIT_FAILED,
        })
        .unwrap_or(EXIT_FAILED)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<VerifyReport> {
    let select: Vec<&str> = args.checks.iter().map(String::as_str).collect();
    let start = Instant::now();
    let reports = if args.corrupt_gradient {
        verify::run_suite_with(&select, args.seed, &|p, t| {
            let gr = objective::grad_reg(p);
            let mut gl = objective::grad_loss(p, t)?;
            gl.axpy(1e-3, &gr);
            Ok((gl, gr))
        })?
    } else {
        verify::run_suite(&select, args.seed)?
    };
    let doc = VerifyReport::new(args.seed, &reports, start.elapsed().as_secs_f64());
    io::write_bytes(&args.out, &io::to_json_bytes(&doc))?;
    Ok(doc)
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a).map(|()| {
            eprintln!("wrote {}", a.out.display());
            EXIT_OK
        }),
        Command::Decompose(a) => cmd_decompose(a).map(|summaries| {
            for s in &summaries {
                eprintln!(
                    "restart {}: {} f={:.3e} L={:.3e} R={:.3e} grad_evals={}",
                    s.restart, s.status, s.f, s.loss, s.reg, s.grad_evals
                );
            }
            decompose_code(&summaries)
        }),
        Command::Verify(a) => cmd_verify(a).map(|doc| {
            for c in &doc.checks {
                eprintln!(
                    "{:<36} {} ({} trials, {} failures)",
                    c.id,
                    if c.passed { "pass" } else { "FAIL" },
                    c.trials,
                    c.failures
                );
            }
            if doc.passed {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_INPUT
    })
}
