//! Command-line front end: `run`, `sharpness`, `trs-check` and `fd-check`.
//!
//! Exit codes: 0 on success, 1 when a run aborts, 2 for usage or range
//! errors, 3 when a verification fails.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::driver::{annotate_objective, rate_envelopes, run, Astr2Config};
use crate::error::{Error, Result};
use crate::oracle::{finite_diff_check, make_problem, Problem};
use crate::scaling::{AdagradScaling, DivergentScaling, IntervalPolicy, Scaling};
use crate::sharpness::{
    gen_adagrad_example, gen_divergent_example, hermite_interpolant, replay_check, sample_figure,
};
use crate::trace::{write_breakpoints, write_figure, write_records};
use crate::verify::{check_instance, trs_check, TrsCheckReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ABORTED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "astr2", version, about = "Objective-free adaptive trust-region optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the optimizer on a built-in problem and write its trace.
    Run(RunArgs),
    /// Generate a worst-case example, its figure table and a replay check.
    Sharpness(SharpnessArgs),
    /// Compare the subproblem solvers against the brute-force oracle.
    TrsCheck(TrsCheckArgs),
    /// Check a built-in problem's derivatives by finite differences.
    FdCheck(FdCheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingFamily {
    Adagrad,
    Divergent,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Built-in problem name.
    #[arg(long)]
    pub problem: String,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Starting point: `default`, `random`, or comma-separated values.
    #[arg(long, default_value = "default")]
    pub x0: String,
    /// Seed for `--x0 random`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ScalingFamily::Adagrad)]
    pub scaling: ScalingFamily,
    #[arg(long, default_value_t = 1.0)]
    pub varsigma: f64,
    /// Adagrad exponent for the linear weight.
    #[arg(long, default_value_t = 0.5)]
    pub mu: f64,
    /// Adagrad exponent for the quadratic weight.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta_l: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta_q: f64,
    /// Alternate Adagrad weights between ϑ·ŵ and ŵ.
    #[arg(long)]
    pub oscillating: bool,
    #[arg(long, default_value_t = 1.0)]
    pub kappa_w: f64,
    /// Lower end of the band (default: the upper end).
    #[arg(long)]
    pub nu1: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub mu1: f64,
    /// Lower end of the band (default: the upper end).
    #[arg(long)]
    pub nu2: Option<f64>,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub mu2: f64,
    /// Divergent exponent for `w^L` (default μ₁).
    #[arg(long)]
    pub exp_l: Option<f64>,
    /// Divergent exponent for `w^Q` (default μ₂).
    #[arg(long)]
    pub exp_q: Option<f64>,
    /// Divergent coefficient (default κ_w).
    #[arg(long)]
    pub coeff: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub chi: f64,
    #[arg(long, default_value_t = 1.0)]
    pub xi: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long)]
    pub eps1: Option<f64>,
    #[arg(long)]
    pub eps2: Option<f64>,
    /// Use Krylov subspaces of at most this dimension.
    #[arg(long)]
    pub subspace_dim: Option<usize>,
    /// Trace CSV path.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Leave the diagnostic `f` column empty.
    #[arg(long)]
    pub no_f: bool,
}

#[derive(Debug, Args)]
pub struct SharpnessArgs {
    #[arg(long, value_enum, default_value_t = ScalingFamily::Adagrad)]
    pub family: ScalingFamily,
    /// Adagrad: exponent of the linear weight.
    #[arg(long, default_value_t = 0.5)]
    pub mu: f64,
    /// Adagrad: exponent of the quadratic weight.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub nu: f64,
    /// Divergent: exponent bands (ν₁, μ₁) and (ν₂, μ₂).
    /// Lower end of the band (default: the upper end).
    #[arg(long)]
    pub nu1: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub mu1: f64,
    /// Lower end of the band (default: the upper end).
    #[arg(long)]
    pub nu2: Option<f64>,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub mu2: f64,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    pub varsigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa_w: f64,
    /// Last iteration index K.
    #[arg(long, short = 'k', default_value_t = 10)]
    pub iterations: usize,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Display value for f at x₀.
    #[arg(long)]
    pub f0_shift: Option<f64>,
    /// Figure CSV path.
    #[arg(long, short, default_value = "figure.csv")]
    pub output: PathBuf,
    /// Breakpoint CSV path (default: the figure path with `_breakpoints`).
    #[arg(long)]
    pub breakpoints: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrsCheckArgs {
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 5)]
    pub max_n: usize,
    /// Comma-separated radii.
    #[arg(long, default_value = "0.1,1,10")]
    pub radii: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Explicit instance: comma-separated gradient (requires --hessian).
    #[arg(long, requires = "hessian", allow_hyphen_values = true)]
    pub gradient: Option<String>,
    /// Explicit instance: row-major comma-separated Hessian.
    #[arg(long, requires = "gradient", allow_hyphen_values = true)]
    pub hessian: Option<String>,
    /// Explicit instance radius.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
}

#[derive(Debug, Args)]
pub struct FdCheckArgs {
    #[arg(long)]
    pub problem: String,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    /// Number of random points (uniform in [−2, 2]ⁿ) besides x₀.
    #[arg(long, default_value_t = 10)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
}

/// Parses `a,b,c` into floats.
pub fn parse_list(text: &str, what: &'static str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(what, format!("cannot parse `{t}`")))
        })
        .collect()
}

fn adagrad_from(args: &RunArgs) -> Result<Scaling> {
    let policy = if args.oscillating {
        IntervalPolicy::Oscillating
    } else {
        IntervalPolicy::Upper
    };
    let s = AdagradScaling::with_interval(args.varsigma, args.mu, args.nu, args.theta_l, args.theta_q, policy)?;
    Ok(Scaling::Adagrad(s))
}

fn divergent_from(args: &RunArgs) -> Result<Scaling> {
    let s = DivergentScaling::new(
        args.varsigma,
        args.kappa_w,
        (args.nu1.unwrap_or(args.mu1), args.mu1),
        (args.nu2.unwrap_or(args.mu2), args.mu2),
        args.exp_l.unwrap_or(args.mu1),
        args.exp_q.unwrap_or(args.mu2),
        args.coeff.unwrap_or(args.kappa_w),
    )?;
    Ok(Scaling::Divergent(s))
}

/// The configuration a `run` invocation describes.
pub fn run_config(args: &RunArgs) -> Result<Astr2Config> {
    let scaling = match args.scaling {
        ScalingFamily::Adagrad => adagrad_from(args)?,
        ScalingFamily::Divergent => divergent_from(args)?,
    };
    let config = Astr2Config {
        tau: args.tau,
        chi: args.chi,
        xi: args.xi,
        scaling,
        max_iter: args.max_iter,
        eps1: args.eps1,
        eps2: args.eps2,
        subspace_max_dim: args.subspace_dim,
    };
    config.validate()?;
    Ok(config)
}

fn starting_point(text: &str, default: DVector<f64>, seed: u64) -> Result<DVector<f64>> {
    let n = default.len();
    match text {
        "default" => Ok(default),
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0)))
        }
        list => {
            let v = parse_list(list, "x0")?;
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
            Ok(DVector::from_vec(v))
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn report_usage(e: &Error, err: &mut dyn Write) -> i32 {
    let _ = writeln!(err, "error: {e}");
    EXIT_USAGE
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let setup = (|| {
        let problem = make_problem(&args.problem, args.n)?;
        let config = run_config(args)?;
        let x0 = starting_point(&args.x0, problem.x0(), args.seed)?;
        Ok::<_, Error>((problem, config, x0))
    })();
    let (problem, config, x0) = match setup {
        Ok(s) => s,
        Err(e) => return report_usage(&e, err),
    };
    let (mut trace, failure) = match run(&problem, &x0, &config) {
        Ok(t) => (t, None),
        Err(e) => (e.partial, Some(e.error)),
    };
    if !args.no_f {
        annotate_objective(&mut trace, &problem);
    }
    if let Some(path) = &args.output {
        let written = create(path).and_then(|w| write_records(w, &trace.records));
        if let Err(e) = written {
            let _ = writeln!(err, "error: writing {}: {e}", path.display());
            return EXIT_ABORTED;
        }
    }
    if let Some(e) = failure {
        let _ = writeln!(err, "error: run aborted after {} iterations: {e}", trace.records.len());
        return EXIT_ABORTED;
    }
    let env = rate_envelopes(&trace.records);
    let last = trace.records.last().expect("max_iter ≥ 1");
    let _ = writeln!(out, "iterations                 {}", trace.records.len());
    let _ = writeln!(out, "converged                  {}", trace.converged);
    let _ = writeln!(out, "final norm_g               {:.6e}", last.g_norm);
    let _ = writeln!(out, "final phi                  {:.6e}", last.phi);
    let _ = writeln!(out, "sup (k+1) avg norm_g^2     {:.6e}", env.avg_grad_sq);
    let _ = writeln!(out, "sup (k+1) avg hatphi^3     {:.6e}", env.avg_hatphi_cubed);
    let _ = writeln!(out, "sup sqrt(k+1) min norm_g   {:.6e}", env.min_grad);
    let _ = writeln!(out, "sup cbrt(k+1) min hatphi   {:.6e}", env.min_hatphi);
    EXIT_OK
}

fn breakpoint_path(figure: &Path) -> PathBuf {
    let stem = figure.file_stem().map_or("figure".into(), |s| s.to_string_lossy().into_owned());
    let ext = figure.extension().map_or("csv".into(), |s| s.to_string_lossy().into_owned());
    figure.with_file_name(format!("{stem}_breakpoints.{ext}"))
}

pub fn cmd_sharpness(args: &SharpnessArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let built = (|| {
        let (seq, scaling) = match args.family {
            ScalingFamily::Adagrad => {
                let seq = gen_adagrad_example(args.mu, args.nu, args.epsilon, args.varsigma, args.iterations)?;
                let s = AdagradScaling::new(args.varsigma, args.mu, args.nu)?;
                (seq, Scaling::Adagrad(s))
            }
            ScalingFamily::Divergent => {
                let seq = gen_divergent_example(args.mu2, args.epsilon, args.varsigma, args.kappa_w, args.iterations)?;
                let s = DivergentScaling::upper_band(
                    args.varsigma,
                    args.kappa_w,
                    (args.nu1.unwrap_or(args.mu1), args.nu2.unwrap_or(args.mu2)),
                    (args.mu1, args.mu2),
                )?;
                (seq, Scaling::Divergent(s))
            }
        };
        let interp = hermite_interpolant(&seq)?;
        Ok::<_, Error>((seq, scaling, interp))
    })();
    let (seq, scaling, interp) = match built {
        Ok(b) => b,
        Err(e) => return report_usage(&e, err),
    };
    let rows = sample_figure(&seq, &interp, args.samples, args.f0_shift);
    let bp_path = args.breakpoints.clone().unwrap_or_else(|| breakpoint_path(&args.output));
    let written = create(&args.output)
        .and_then(|w| write_figure(w, &rows))
        .and_then(|_| create(&bp_path))
        .and_then(|w| write_breakpoints(w, &seq, args.f0_shift));
    if let Err(e) = written {
        let _ = writeln!(err, "error: writing tables: {e}");
        return EXIT_ABORTED;
    }
    let report = match replay_check(&seq, &scaling) {
        Ok(r) => r,
        Err(e) => return report_usage(&e, err),
    };
    let k = seq.last_index();
    let _ = writeln!(out, "breakpoints      {}", k + 1);
    let _ = writeln!(out, "f0               {:.16e}", seq.f0());
    let _ = writeln!(out, "f_(K+1)          {:.16e}", seq.f[k + 1]);
    let _ = writeln!(out, "samples          {}", rows.len());
    let _ = writeln!(out, "replay steps     {}", report.iterations);
    let _ = writeln!(out, "max step error   {:.3e}", report.max_step_error);
    let _ = writeln!(out, "max radius error {:.3e}", report.max_radius_error);
    let _ = writeln!(out, "replay           {}", if report.passed { "PASS" } else { "FAIL" });
    if report.passed {
        EXIT_OK
    } else {
        EXIT_VERIFY
    }
}

fn explicit_instance(args: &TrsCheckArgs) -> Result<Option<(DVector<f64>, DMatrix<f64>)>> {
    let (Some(g), Some(h)) = (&args.gradient, &args.hessian) else {
        return Ok(None);
    };
    let g = parse_list(g, "gradient")?;
    let h = parse_list(h, "hessian")?;
    let n = g.len();
    if h.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, got: h.len() });
    }
    Ok(Some((DVector::from_vec(g), DMatrix::from_row_slice(n, n, &h))))
}

pub fn cmd_trs_check(args: &TrsCheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let report = (|| {
        if let Some((g, h)) = explicit_instance(args)? {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let c = check_instance(&g, &h, args.radius, &mut rng)?;
            let mut report = TrsCheckReport {
                instances: 1,
                solves: 0,
                seed: args.seed,
                max_oracle_gap: 0.0,
                max_oracle_excess: f64::NEG_INFINITY,
                max_krylov_gap: 0.0,
                worst_kkt: Default::default(),
                kkt_failures: 0,
            };
            report.absorb(&c);
            return Ok::<_, Error>((report, Some(c.exact)));
        }
        let radii = parse_list(&args.radii, "radii")?;
        if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::invalid("radii", "must be positive"));
        }
        Ok((trs_check(args.count, args.max_n, &radii, args.seed)?, None))
    })();
    let (report, single) = match report {
        Ok(r) => r,
        Err(e) => return report_usage(&e, err),
    };
    if let Some(dq) = single {
        let _ = writeln!(out, "model decrease       {dq:.16e}");
    }
    let _ = write!(out, "{}", report.render());
    if report.passed() {
        EXIT_OK
    } else {
        EXIT_VERIFY
    }
}

pub fn cmd_fd_check(args: &FdCheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let problem = match make_problem(&args.problem, args.n) {
        Ok(p) => p,
        Err(e) => return report_usage(&e, err),
    };
    if !(args.h > 0.0) {
        return report_usage(&Error::invalid("h", "must be positive"), err);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut points = vec![problem.x0()];
    for _ in 0..args.points {
        points.push(DVector::from_fn(problem.dim(), |_, _| rng.random_range(-2.0..=2.0)));
    }
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    for x in &points {
        match finite_diff_check(&problem, x, args.h) {
            Ok(r) => {
                worst_g = worst_g.max(r.gradient_error);
                worst_h = worst_h.max(r.hessian_error);
            }
            Err(e) => return report_usage(&e, err),
        }
    }
    let ok = worst_g <= args.tol && worst_h <= args.tol;
    let _ = writeln!(out, "problem          {} (n = {})", problem.name(), problem.dim());
    let _ = writeln!(out, "points           {}", points.len());
    let _ = writeln!(out, "gradient error   {worst_g:.3e}");
    let _ = writeln!(out, "hessian error    {worst_h:.3e}");
    let _ = writeln!(out, "result           {}", if ok { "PASS" } else { "FAIL" });
    if ok {
        EXIT_OK
    } else {
        EXIT_VERIFY
    }
}

/// Parses `argv` and dispatches. Usage errors print clap's message and
/// return 2 (help and version requests return 0).
pub fn main_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match &cli.command {
        Command::Run(a) => cmd_run(a, out, err),
        Command::Sharpness(a) => cmd_sharpness(a, out, err),
        Command::TrsCheck(a) => cmd_trs_check(a, out, err),
        Command::FdCheck(a) => cmd_fd_check(a, out, err),
    }
}
