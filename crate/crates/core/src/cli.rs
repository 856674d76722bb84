//! The `crcalc` command line.
//!
//! Exit codes: 0 converged or all checks passed, 1 configuration error,
//! 2 iteration limit reached or line search stalled, 3 divergence,
//! singularity or an unidentifiable model, 4 at least one check failed.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checks::{error_name, run_checks, CheckTarget};
use crate::config::{ComplexValue, ConfigError, ProblemKind, RunConfig, ScheduleKind};
use crate::cr_core::ComplexPoint;
use crate::error::CrError;
use crate::linalg::{CVector, C64};
use crate::lms::simulate;
use crate::lsq::LsqProblem;
use crate::optim::{check_minimum, minimize, OptimResult, Status, Target};
use crate::problems::{example1_closed_form, example2_as_lsq, Example1Loss, Example1Problem};
use crate::trace::{fmt_f64, write_lms_trace, write_optimizer_trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

pub const THREADS_ENV: &str = "CRCALC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "crcalc", version, about = "Complex-valued optimization with Wirtinger calculus")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Trace output file (CSV).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Only print errors and failed checks.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize a loss with one of the Newton-type strategies.
    Optimize(OptimizeArgs),
    /// Verify derivative, Hessian and structure identities on a problem.
    Check(CheckArgs),
    /// Simulate the complex LMS adaptive filter.
    Lms(LmsArgs),
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// example1 | example2 | custom-polynomial
    #[arg(long)]
    pub problem: Option<String>,
    /// identity | newton | quasi_newton | gauss_newton | quasi_gauss_newton
    #[arg(long)]
    pub algorithm: Option<String>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub damping: Option<f64>,
    /// off | armijo
    #[arg(long)]
    pub backtracking: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    /// Start point, one value per coordinate.
    #[arg(long, allow_hyphen_values = true, num_args = 1.., value_delimiter = ',')]
    pub z0: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// example1 | example2 | custom-polynomial
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    /// Perturb the analytic conjugate cogradient (negative control).
    #[arg(long)]
    pub corrupt_gradient: bool,
}

#[derive(Debug, Args)]
pub struct LmsArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// constant | decay
    #[arg(long)]
    pub schedule: Option<String>,
}

#[derive(Debug)]
enum Failure {
    Config(ConfigError),
    Runtime(CrError),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<CrError> for Failure {
    fn from(e: CrError) -> Self {
        Failure::Runtime(e)
    }
}

/// Exit code for a library error raised during a run.
pub fn exit_code_for(e: &CrError) -> i32 {
    match e {
        CrError::InvalidArgument(_) | CrError::Dimension(_) | CrError::UnsupportedStrategy { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let mut stdout = std::io::stdout().lock();
    match execute(cli, &mut stdout) {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}: {e}", error_name(&e));
            exit_code_for(&e)
        }
    }
}

fn configure_threads() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
    // A second initialization in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, ConfigError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn text(s: &str) -> ComplexValue {
    ComplexValue::Text(s.to_string())
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut cfg = load_config(&cli.config)?;
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(p) = cli.out {
        cfg.output.trace = Some(p);
    }
    let mut printer = Printer { out, quiet: cli.quiet };
    match cli.command {
        Command::Optimize(a) => {
            if let Some(p) = a.problem {
                cfg.problem = Some(p.parse()?);
            }
            if let Some(s) = a.algorithm {
                cfg.algorithm = Some(s);
            }
            let o = &mut cfg.optimizer;
            o.step = a.step.or(o.step);
            o.max_iters = a.max_iters.or(o.max_iters);
            o.grad_tol = a.grad_tol.or(o.grad_tol);
            o.damping = a.damping.or(o.damping);
            if let Some(b) = a.backtracking {
                o.backtracking = Some(match b.as_str() {
                    "off" => crate::config::BacktrackingKind::Off,
                    "armijo" => crate::config::BacktrackingKind::Armijo,
                    other => return Err(ConfigError(format!("--backtracking: expected off or armijo, got '{other}'")).into()),
                });
            }
            if let Some(z0) = a.z0 {
                o.z0 = Some(z0.iter().map(|s| text(s)).collect());
            }
            if let Some(s) = a.alpha {
                cfg.example.alpha = Some(text(&s));
            }
            if let Some(s) = a.beta {
                cfg.example.beta = Some(text(&s));
            }
            cmd_optimize(&cfg, &mut printer)
        }
        Command::Check(a) => {
            if let Some(p) = a.problem {
                cfg.problem = Some(p.parse()?);
            }
            if let Some(s) = a.alpha {
                cfg.example.alpha = Some(text(&s));
            }
            if let Some(s) = a.beta {
                cfg.example.beta = Some(text(&s));
            }
            cmd_check(&cfg, a.corrupt_gradient, &mut printer)
        }
        Command::Lms(a) => {
            let l = &mut cfg.lms;
            l.n = a.n.or(l.n);
            l.step = a.step.or(l.step);
            l.steps = a.steps.or(l.steps);
            l.noise_var = a.noise.or(l.noise_var);
            if let Some(s) = a.schedule {
                l.schedule = Some(match s.as_str() {
                    "constant" => ScheduleKind::Constant,
                    "decay" => ScheduleKind::Decay,
                    other => return Err(ConfigError(format!("--schedule: expected constant or decay, got '{other}'")).into()),
                });
            }
            if a.n.is_some() && cfg.lms.a_true.as_ref().is_some_and(|v| v.len() != a.n.unwrap_or(0)) {
                return Err(ConfigError("--n conflicts with the length of lms.a_true".into()).into());
            }
            cmd_lms(&cfg, &mut printer)
        }
    }
}

struct Printer<'a> {
    out: &'a mut dyn Write,
    quiet: bool,
}

impl Printer<'_> {
    fn line(&mut self, key: &str, value: impl std::fmt::Display) -> Result<(), Failure> {
        if !self.quiet {
            writeln!(self.out, "{key:<12} {value}").map_err(|e| Failure::Io(e.to_string()))?;
        }
        Ok(())
    }

    fn raw(&mut self, s: &str) -> Result<(), Failure> {
        write!(self.out, "{s}").map_err(|e| Failure::Io(e.to_string()))
    }
}

/// `a+bj` with round-trip precision.
pub fn fmt_complex(c: C64) -> String {
    let sign = if c.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}j", fmt_f64(c.re), sign, fmt_f64(c.im.abs()))
}

fn fmt_vector(v: &CVector) -> String {
    let items: Vec<String> = v.iter().map(|c| fmt_complex(*c)).collect();
    format!("[{}]", items.join(", "))
}

fn create_trace(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Io(format!("cannot create trace file {}: {e}", path.display())))
}

enum Problem {
    Field(Example1Loss),
    Lsq(LsqProblem),
}

fn identifiable(p: Example1Problem) -> Result<Example1Problem, Failure> {
    if !p.is_identifiable() {
        return Err(CrError::Unidentifiable { gap: p.gap().abs() }.into());
    }
    Ok(p)
}

fn cmd_optimize(cfg: &RunConfig, pr: &mut Printer<'_>) -> Result<i32, Failure> {
    let kind = cfg.problem();
    let strategy = cfg.strategy()?;
    let ocfg = cfg.optimizer_config()?;
    let (problem, example) = match kind {
        ProblemKind::Example1 => {
            let p = identifiable(cfg.example_problem()?)?;
            (Problem::Field(Example1Loss { problem: p.clone() }), Some(p))
        }
        ProblemKind::Example2 => {
            let p = identifiable(cfg.example_problem()?)?;
            (Problem::Lsq(example2_as_lsq(&p)?), Some(p))
        }
        ProblemKind::CustomPolynomial => (Problem::Lsq(cfg.custom_problem()?.0), None),
        ProblemKind::Lms => {
            return Err(ConfigError("problem 'lms' is run with the lms subcommand".into()).into());
        }
    };
    let target = match &problem {
        Problem::Field(f) => Target::Field(f),
        Problem::Lsq(l) => Target::Lsq(l),
    };
    let n = target.dim();
    let z0 = ComplexPoint::new(cfg.z0(n)?)?;
    let result = minimize(target, &z0, strategy, &ocfg)?;

    if let Some(path) = &cfg.output.trace {
        let mut w = create_trace(path)?;
        write_optimizer_trace(&mut w, n, &result.trace)
            .and_then(|_| w.flush().map_err(csv::Error::from))
            .map_err(|e| Failure::Io(format!("cannot write trace {}: {e}", path.display())))?;
    }
    report_optimize(cfg, strategy.kind.name(), target, &result, example.as_ref(), pr)?;
    Ok(match result.status {
        Status::Converged => EXIT_OK,
        Status::MaxIters | Status::Stalled => EXIT_NOT_CONVERGED,
    })
}

fn report_optimize(
    cfg: &RunConfig,
    algorithm: &str,
    target: Target<'_>,
    r: &OptimResult,
    example: Option<&Example1Problem>,
    pr: &mut Printer<'_>,
) -> Result<(), Failure> {
    pr.line("problem", cfg.problem().name())?;
    pr.line("algorithm", algorithm)?;
    let status = match r.status {
        Status::Converged => "converged",
        Status::MaxIters => "max_iters reached",
        Status::Stalled => "stalled in line search",
    };
    pr.line("status", status)?;
    pr.line("iterations", r.iterations)?;
    for (k, z) in r.z.iter().enumerate() {
        pr.line(&format!("z[{k}]"), fmt_complex(*z))?;
    }
    pr.line("loss", fmt_f64(r.loss))?;
    pr.line("grad_norm", fmt_f64(r.grad_norm))?;
    let hess = ComplexPoint::new(r.z.clone())
        .and_then(|p| target.hessian(&p))
        .map(|q| check_minimum(&q).name().to_string())
        .unwrap_or_else(|e| format!("unavailable ({e})"));
    pr.line("hessian", hess)?;
    if let Some(p) = example {
        if let Ok(zopt) = example1_closed_form(p) {
            pr.line("z_opt", format!("{} (closed form, distance {:.3e})", fmt_complex(zopt), (r.z[0] - zopt).norm()))?;
        }
    }
    if let Some(path) = &cfg.output.trace {
        pr.line("trace", path.display())?;
    }
    Ok(())
}

fn cmd_check(cfg: &RunConfig, corrupt: bool, pr: &mut Printer<'_>) -> Result<i32, Failure> {
    let kind = cfg.problem();
    if corrupt && kind != ProblemKind::Example1 {
        return Err(ConfigError("--corrupt-gradient is only available for example1".into()).into());
    }
    let seed = cfg.seed();
    let report = match kind {
        ProblemKind::Example1 => {
            let p = cfg.example_problem()?;
            run_checks(CheckTarget::Example1 { problem: &p, corrupt }, seed)
        }
        ProblemKind::Example2 => {
            let p = cfg.example_problem()?;
            run_checks(CheckTarget::Example2 { problem: &p }, seed)
        }
        ProblemKind::CustomPolynomial => {
            let (lsq, holo) = cfg.custom_problem()?;
            run_checks(
                CheckTarget::Lsq {
                    problem: &lsq,
                    holomorphic_model: holo,
                },
                seed,
            )
        }
        ProblemKind::Lms => {
            return Err(ConfigError("check supports example1, example2 and custom-polynomial".into()).into());
        }
    };
    if pr.quiet {
        if !report.all_passed() {
            pr.raw(&report.render_failures())?;
        }
    } else {
        pr.raw(&format!("checks on {} (seed {seed})\n", kind.name()))?;
        pr.raw(&report.render())?;
    }
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_lms(cfg: &RunConfig, pr: &mut Printer<'_>) -> Result<i32, Failure> {
    let s = cfg.lms_settings()?;
    let sim = simulate(&s.model, s.steps, s.schedule)?;
    if let Some(path) = &cfg.output.trace {
        let mut w = create_trace(path)?;
        write_lms_trace(&mut w, &sim.rows)
            .and_then(|_| w.flush().map_err(csv::Error::from))
            .map_err(|e| Failure::Io(format!("cannot write trace {}: {e}", path.display())))?;
    }
    pr.line("n", s.model.n)?;
    pr.line("steps", s.steps)?;
    pr.line("step_bound", format!("{} (2/lambda_max)", fmt_f64(s.model.step_bound())))?;
    pr.line("a_true", fmt_vector(&s.a_true))?;
    pr.line("wiener", fmt_vector(&sim.wiener))?;
    pr.line("a_hat", fmt_vector(&sim.a_hat))?;
    pr.line("misalignment", fmt_f64(sim.misalignment))?;
    if let Some(path) = &cfg.output.trace {
        pr.line("trace", path.display())?;
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_format_round_trips() {
        for c in [C64::new(1.0, -2.5), C64::new(-0.1, 0.0), C64::new(1e-300, -0.0), C64::new(3.0, 1.0 / 3.0)] {
            let s = fmt_complex(c);
            assert_eq!(crate::config::parse_complex(&s).unwrap(), c, "{s}");
        }
    }

    #[test]
    fn exit_codes_for_errors() {
        assert_eq!(exit_code_for(&CrError::Unidentifiable { gap: 0.0 }), EXIT_RUNTIME);
        assert_eq!(exit_code_for(&CrError::UnsupportedStrategy { strategy: "gauss_newton" }), EXIT_CONFIG);
        assert_eq!(
            exit_code_for(&CrError::Diverged {
                iteration: 3,
                reason: String::new()
            }),
            EXIT_RUNTIME
        );
    }

    #[test]
    fn parse_errors_are_config_errors() {
        assert_eq!(run(["crcalc", "optimize", "--bogus"]), EXIT_CONFIG);
        assert_eq!(run(["crcalc", "--help"]), EXIT_OK);
        assert_eq!(run(["crcalc", "optimize", "--problem", "nope"]), EXIT_CONFIG);
    }
}
