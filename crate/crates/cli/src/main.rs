//! `gmur`: validate states and observables, evaluate the uncertainty bounds,
//! sweep them over a parameter grid and run the numerical verification suite.
//!
//! Exit codes: 0 success, 1 malformed input or internal error, 2 invalid
//! state or observable, 3 verification failure, 64 usage error, 74 I/O error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use gmur::entropy::EntropyUnits;
use gmur::linalg::DEFAULT_PSD_TOL;
use gmur::mur::{c_inc_scalar, c_inc_vector, MurReport, Thresholds};
use gmur::observables::{
    noisy_position_then_momentum, sharp_projected, InputJson, ScalarObservableJson,
};
use gmur::states::{purity_info, PhysContext, Validation, ValidationFailure};
use gmur::verify::{run_suite, Suite, SuiteConfig, DEFAULT_BUDGET};
use nalgebra::DVector;

const EXIT_MALFORMED: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_VERIFY_FAILED: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 74;

#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, msg: msg.into() }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Failure {
            code: EXIT_IO,
            msg: format!("{}: {e}", path.display()),
        }
    }
}

impl From<gmur::Error> for Failure {
    fn from(e: gmur::Error) -> Self {
        let code = match e {
            gmur::Error::Input(_) | gmur::Error::Domain(_) => EXIT_USAGE,
            _ => EXIT_MALFORMED,
        };
        Failure { code, msg: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Parser)]
#[command(name = "gmur", version, about = "Entropic measurement uncertainty for Gaussian position/momentum")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a state or observable JSON file.
    Validate { path: PathBuf },
    /// Print the incompatibility degree with its optimizer and worst state.
    Bound {
        kind: Kind,
        #[command(flatten)]
        params: Params,
    },
    /// Evaluate the incompatibility degree over a grid and write CSV.
    Sweep(SweepArgs),
    /// Run the numerical verification suite and emit JSON lines.
    Verify {
        #[arg(long, default_value = "all")]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Objective evaluations per search, summed over restarts.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print one of the worked example observables as JSON.
    Example {
        which: ExampleKind,
        /// Position noise of the noisy-then-sharp measurement.
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        /// Angle between the directions, radians.
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        hbar: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Scalar,
    Vector,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    All,
    Scalar,
    Vector,
    Entropy,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExampleKind {
    Delta,
    Pvm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Units {
    Bits,
    Nats,
}

impl From<Units> for EntropyUnits {
    fn from(u: Units) -> Self {
        match u {
            Units::Bits => EntropyUnits::Bits,
            Units::Nats => EntropyUnits::Nats,
        }
    }
}

#[derive(clap::Args, Clone, Copy)]
struct Params {
    /// Angle between u and v in radians (scalar only).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    hbar: f64,
    #[arg(long)]
    eps1: f64,
    #[arg(long)]
    eps2: f64,
    /// Degrees of freedom. Defaults to 2 for scalar bounds and 1 for vector bounds.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value = "bits")]
    units: Units,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variable {
    Alpha,
    EpsProduct,
    EpsRatio,
    Hbar,
    N,
}

impl Variable {
    fn name(self) -> &'static str {
        match self {
            Variable::Alpha => "alpha",
            Variable::EpsProduct => "eps_product",
            Variable::EpsRatio => "eps_ratio",
            Variable::Hbar => "hbar",
            Variable::N => "n",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Spacing {
    Linear,
    Log,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[arg(long)]
    variable: Variable,
    /// Bound to evaluate; `n` sweeps default to vector, everything else to scalar.
    #[arg(long)]
    kind: Option<Kind>,
    /// Explicit grid, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["start", "stop", "count"])]
    values: Option<Vec<f64>>,
    #[arg(long)]
    start: Option<f64>,
    #[arg(long)]
    stop: Option<f64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, default_value = "linear")]
    spacing: Spacing,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    hbar: f64,
    #[arg(long, default_value_t = 0.5)]
    eps1: f64,
    #[arg(long, default_value_t = 0.5)]
    eps2: f64,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value = "bits")]
    units: Units,
    #[arg(long)]
    out: PathBuf,
}

fn psd_tol() -> CliResult<f64> {
    match std::env::var("GMUR_TOL") {
        Err(_) => Ok(DEFAULT_PSD_TOL),
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(t) if t >= 0.0 && t.is_finite() => Ok(t),
            _ => Err(Failure::usage(format!("GMUR_TOL must be a nonnegative number, got '{s}'"))),
        },
    }
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Failure {
        code: EXIT_MALFORMED,
        msg: e.to_string(),
    })?;
    let mut out = io::stdout().lock();
    writeln!(out, "{s}").map_err(|e| Failure {
        code: EXIT_IO,
        msg: format!("stdout: {e}"),
    })
}

#[derive(Serialize)]
struct ValidateReport<'a> {
    kind: &'a str,
    valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<&'a ValidationFailure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    det_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    is_pure: Option<bool>,
}

fn report_validation<T>(kind: &str, v: &Validation<T>, purity: Option<(f64, bool)>) -> CliResult<u8> {
    let (valid, failure) = match v {
        Validation::Valid(_) => (true, None),
        Validation::Invalid(f) => (false, Some(f)),
    };
    print_json(&ValidateReport {
        kind,
        valid,
        failure,
        det_v: purity.map(|p| p.0),
        is_pure: purity.map(|p| p.1),
    })?;
    if let Some(f) = failure {
        eprintln!("invalid {kind}: {f}");
        return Ok(EXIT_INVALID);
    }
    Ok(0)
}

fn cmd_validate(path: &Path) -> CliResult<u8> {
    let tol = psd_tol()?;
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let malformed = |msg: String| Failure { code: EXIT_MALFORMED, msg };
    let input: InputJson = serde_json::from_str(&text)
        .map_err(|e| malformed(format!("{}: not a state or observable: {e}", path.display())))?;
    let lift = |e: gmur::Error| malformed(e.to_string());
    match input {
        InputJson::State(s) => {
            let v = s.validate(tol).map_err(lift)?;
            let purity = match &v {
                Validation::Valid(st) => {
                    let p = purity_info(st).map_err(lift)?;
                    Some((p.det_v, p.is_pure))
                }
                Validation::Invalid(_) => None,
            };
            report_validation("state", &v, purity)
        }
        InputJson::Scalar(m) => report_validation("scalar_observable", &m.validate().map_err(lift)?, None),
        InputJson::Triple(m) => report_validation("observable", &m.validate(tol).map_err(lift)?, None),
    }
}

/// Unit directions with `u·v = cos α` in dimension `n`.
fn directions(alpha: f64, n: usize) -> CliResult<(DVector<f64>, DVector<f64>)> {
    if !alpha.is_finite() {
        return Err(Failure::usage("--alpha must be finite"));
    }
    let mut u = DVector::zeros(n);
    let mut v = DVector::zeros(n);
    u[0] = 1.0;
    v[0] = alpha.cos();
    if n == 1 {
        if alpha.sin().abs() > 1e-12 {
            return Err(Failure::usage("a nonzero angle needs --n of at least 2"));
        }
        v[0] = v[0].signum();
    } else {
        v[1] = alpha.sin();
    }
    Ok((u, v))
}

#[derive(Clone, Copy)]
struct Point {
    kind: Kind,
    alpha: f64,
    hbar: f64,
    eps1: f64,
    eps2: f64,
    n: usize,
}

fn evaluate(p: Point, units: EntropyUnits) -> CliResult<MurReport> {
    let eps = Thresholds::new(p.eps1, p.eps2)?;
    let ctx = PhysContext::new(p.hbar, p.n)?;
    match p.kind {
        Kind::Scalar => {
            let (u, v) = directions(p.alpha, p.n)?;
            Ok(c_inc_scalar(&u, &v, &eps, ctx, units)?)
        }
        Kind::Vector => Ok(c_inc_vector(&eps, ctx, units)?),
    }
}

fn cmd_bound(kind: Kind, params: Params) -> CliResult<u8> {
    let alpha = match (kind, params.alpha) {
        (Kind::Scalar, Some(a)) => a,
        (Kind::Scalar, None) => return Err(Failure::usage("scalar bounds need --alpha")),
        (Kind::Vector, Some(_)) => return Err(Failure::usage("--alpha applies to scalar bounds only")),
        (Kind::Vector, None) => 0.0,
    };
    let n = params.n.unwrap_or(if kind == Kind::Scalar { 2 } else { 1 });
    let report = evaluate(
        Point {
            kind,
            alpha,
            hbar: params.hbar,
            eps1: params.eps1,
            eps2: params.eps2,
            n,
        },
        params.units.into(),
    )?;
    print_json(&report)?;
    Ok(0)
}

fn grid(args: &SweepArgs) -> CliResult<Vec<f64>> {
    let g = match (&args.values, args.start, args.stop, args.count) {
        (Some(v), _, _, _) => v.clone(),
        (None, Some(a), Some(b), Some(k)) => {
            if k == 0 {
                return Err(Failure::usage("--count must be positive"));
            }
            if args.spacing == Spacing::Log && !(a > 0.0 && b > 0.0) {
                return Err(Failure::usage("log spacing needs positive endpoints"));
            }
            let t = |i: usize| if k == 1 { 0.0 } else { i as f64 / (k - 1) as f64 };
            (0..k)
                .map(|i| match args.spacing {
                    Spacing::Linear => a + (b - a) * t(i),
                    Spacing::Log => (a.ln() + (b.ln() - a.ln()) * t(i)).exp(),
                })
                .collect()
        }
        _ => return Err(Failure::usage("give --values or all of --start, --stop, --count")),
    };
    if g.is_empty() {
        return Err(Failure::usage("grid is empty"));
    }
    Ok(g)
}

fn sweep_point(args: &SweepArgs, kind: Kind, x: f64) -> CliResult<Point> {
    let mut p = Point {
        kind,
        alpha: args.alpha,
        hbar: args.hbar,
        eps1: args.eps1,
        eps2: args.eps2,
        n: args.n.unwrap_or(if kind == Kind::Scalar { 2 } else { 1 }),
    };
    match args.variable {
        Variable::Alpha => p.alpha = x,
        Variable::Hbar => p.hbar = x,
        Variable::EpsProduct | Variable::EpsRatio => {
            let (prod, ratio) = match args.variable {
                Variable::EpsProduct => (x, args.eps1 / args.eps2),
                _ => (args.eps1 * args.eps2, x),
            };
            if !(prod > 0.0 && ratio > 0.0) {
                return Err(Failure::usage(format!("{} must be positive, got {x}", args.variable.name())));
            }
            p.eps1 = (prod * ratio).sqrt();
            p.eps2 = (prod / ratio).sqrt();
        }
        Variable::N => {
            if !(x >= 1.0 && x.fract() == 0.0) {
                return Err(Failure::usage(format!("n must be a positive integer, got {x}")));
            }
            p.n = x as usize;
        }
    }
    Ok(p)
}

fn cmd_sweep(args: &SweepArgs) -> CliResult<u8> {
    let kind = args.kind.unwrap_or(if args.variable == Variable::N {
        Kind::Vector
    } else {
        Kind::Scalar
    });
    if kind == Kind::Vector && args.variable == Variable::Alpha {
        return Err(Failure::usage("alpha sweeps apply to scalar bounds only"));
    }
    let units: EntropyUnits = args.units.into();
    let xs = grid(args)?;
    let points = xs
        .iter()
        .map(|&x| sweep_point(args, kind, x))
        .collect::<CliResult<Vec<_>>>()?;
    let reports: Vec<MurReport> = points
        .par_iter()
        .map(|&p| evaluate(p, units))
        .collect::<CliResult<Vec<_>>>()?;

    let file = fs::File::create(&args.out).map_err(|e| Failure::io(&args.out, e))?;
    let mut w = csv::Writer::from_writer(file);
    let io_err = |e: csv::Error| Failure {
        code: EXIT_IO,
        msg: format!("{}: {e}", args.out.display()),
    };
    w.write_record(["variable", &format!("value_{}", units.as_str()), "regime", "is_exact"])
        .map_err(io_err)?;
    for (x, r) in xs.iter().zip(&reports) {
        w.write_record([
            x.to_string(),
            r.value.to_string(),
            r.regime.as_str().to_string(),
            r.is_exact.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| Failure::io(&args.out, e))?;
    Ok(0)
}

fn cmd_verify(suite: SuiteArg, seed: u64, budget: usize, out: Option<&Path>) -> CliResult<u8> {
    if budget == 0 {
        return Err(Failure::usage("--budget must be positive"));
    }
    let suite = match suite {
        SuiteArg::All => Suite::All,
        SuiteArg::Scalar => Suite::Scalar,
        SuiteArg::Vector => Suite::Vector,
        SuiteArg::Entropy => Suite::Entropy,
    };
    let cfg = SuiteConfig {
        seed,
        budget,
        ..SuiteConfig::default()
    };
    let records = run_suite(suite, &cfg).map_err(|e| Failure {
        code: EXIT_MALFORMED,
        msg: e.to_string(),
    })?;
    let mut text = String::new();
    for r in &records {
        text.push_str(&serde_json::to_string(r).expect("records serialize"));
        text.push('\n');
    }
    match out {
        Some(p) => fs::write(p, &text).map_err(|e| Failure::io(p, e))?,
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::io(Path::new("<stdout>"), e))?,
    }
    let mut code = 0;
    for r in records.iter().filter(|r| !r.passed()) {
        eprintln!("verification failed: {}", serde_json::to_string(r).expect("records serialize"));
        code = EXIT_VERIFY_FAILED;
    }
    Ok(code)
}

fn cmd_example(which: ExampleKind, delta: f64, alpha: f64, hbar: f64) -> CliResult<u8> {
    let ctx = PhysContext::new(hbar, 2)?;
    let m = match which {
        ExampleKind::Delta => {
            let (u, v) = directions(alpha, 2)?;
            noisy_position_then_momentum(delta, &u, &v, ctx)?
        }
        ExampleKind::Pvm => {
            let (u, v) = directions(std::f64::consts::FRAC_PI_2, 2)?;
            sharp_projected(&u, &v, ctx)?
        }
    };
    print_json(&ScalarObservableJson::from(&m))?;
    Ok(0)
}

fn run(cli: Cli) -> CliResult<u8> {
    match cli.cmd {
        Command::Validate { path } => cmd_validate(&path),
        Command::Bound { kind, params } => cmd_bound(kind, params),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Verify { suite, seed, budget, out } => cmd_verify(suite, seed, budget, out.as_deref()),
        Command::Example { which, delta, alpha, hbar } => cmd_example(which, delta, alpha, hbar),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
