//! Command-line front end. Reports go to the output file (or stdout) as JSON;
//! human-readable notes and errors go to stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args as ClapArgs, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expectation::eval_i;
use crate::generate::{generate, SizeSpec};
use crate::model::{Point, TwoStageProblem};
use crate::optimality::{check_optimality, inf_stationarity_measure, smooth_kkt_check};
use crate::par::configure_threads;
use crate::penalty::{check_nondegeneracy, phi_c, phi_dist, phi_l1, PenaltySpec};
use crate::solvers::{codiff_descent, dca_solve, SolveOptions, SolveReport};

pub const EXIT_OK: i32 = 0;
/// Numerical failure inside the library.
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
/// The solver stopped without converging; the report is still written.
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "codiffsp", version, about = "Nonsmooth two-stage stochastic programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the objective and penalty terms at a point.
    Eval(EvalArgs),
    /// Minimize the penalty function.
    Solve(SolveArgs),
    /// Check first-order optimality conditions at a feasible point.
    Certify(CertifyArgs),
    /// Sample the constraint nondegeneracy condition.
    CheckNondeg(NondegArgs),
    /// Write a random problem instance.
    Generate(GenerateArgs),
    /// Run a small end-to-end check.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Dca,
    Cd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyArg {
    L1,
    Dist,
}

#[derive(Debug, ClapArgs)]
pub struct EvalArgs {
    #[arg(short = 'i', long = "input")]
    pub input: PathBuf,
    /// Point file, or a solve report whose final point is used.
    #[arg(long)]
    pub point: PathBuf,
    #[arg(long, value_enum, default_value = "l1")]
    pub penalty: PenaltyArg,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, ClapArgs)]
pub struct SolveArgs {
    #[arg(short = 'i', long = "input")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "dca")]
    pub solver: SolverArg,
    #[arg(long, value_enum, default_value = "l1")]
    pub penalty: PenaltyArg,
    #[arg(long, default_value_t = 10.0)]
    pub c: f64,
    /// Starting point; defaults to the origin projected onto A.
    #[arg(long)]
    pub start: Option<PathBuf>,
    /// Multiply c by 10 while the result stays infeasible.
    #[arg(long)]
    pub escalate: bool,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol_obj: Option<f64>,
    #[arg(long)]
    pub tol_step: Option<f64>,
    #[arg(long)]
    pub tol_stat: Option<f64>,
    #[arg(long)]
    pub tol_feas: Option<f64>,
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, ClapArgs)]
pub struct CertifyArgs {
    #[arg(short = 'i', long = "input")]
    pub input: PathBuf,
    /// Point file, or a solve report whose final point is used.
    #[arg(long)]
    pub point: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    pub c: f64,
    /// Use the gradient-based KKT check (smooth problems only).
    #[arg(long)]
    pub smooth: bool,
    /// Also estimate the steepest-descent rate over this many directions.
    #[arg(long, default_value_t = 0)]
    pub directions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, ClapArgs)]
pub struct NondegArgs {
    #[arg(short = 'i', long = "input")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, ClapArgs)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long = "S")]
    pub s: usize,
    #[arg(long, default_value_t = 0)]
    pub l: usize,
    /// Give the objective and constraints a concave part.
    #[arg(long)]
    pub dc: bool,
    /// Drop the piecewise-linear terms.
    #[arg(long)]
    pub smooth: bool,
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    objective: f64,
    phi: f64,
    penalty_value: f64,
    feasible: bool,
    max_violation: f64,
}

#[derive(Debug, Serialize)]
struct CertifyReport<'a> {
    #[serde(flatten)]
    certificate: &'a crate::optimality::Certificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    inf_stationarity: Option<f64>,
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, format!("{text}\n"))?,
        None => writeln!(std::io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

/// Reads a point file or the `final_point` of a solve report.
pub fn load_point_or_report(path: &Path) -> Result<Point> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let point = match value.get("final_point") {
        Some(p) => p.clone(),
        None => value,
    };
    Ok(serde_json::from_value(point)?)
}

fn start_point(prob: &TwoStageProblem, path: Option<&Path>) -> Result<Point> {
    match path {
        Some(p) => load_point_or_report(p),
        None => {
            let mut z = Point::zeros(prob.d, prob.m, prob.num_scenarios());
            z.x = prob.first_stage.project(&z.x);
            Ok(z)
        }
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<i32> {
    let prob = TwoStageProblem::load(&a.input)?;
    let z = load_point_or_report(&a.point)?;
    let spec = match a.penalty {
        PenaltyArg::L1 => PenaltySpec::l1(a.c),
        PenaltyArg::Dist => PenaltySpec::dist(a.c),
    };
    let phi = match a.penalty {
        PenaltyArg::L1 => phi_l1(&prob, &z)?,
        PenaltyArg::Dist => phi_dist(&prob, &z)?,
    };
    let feas = prob.is_feasible(&z, 1e-6)?;
    let report = EvalReport {
        objective: eval_i(&prob, &z)?,
        phi,
        penalty_value: phi_c(&prob, spec, &z)?,
        feasible: feas.feasible,
        max_violation: feas.max_violation,
    };
    emit(a.output.as_deref(), &to_json(&report))?;
    Ok(EXIT_OK)
}

fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    if a.penalty == PenaltyArg::Dist {
        return Err(Error::InvalidValue("the solvers minimize the l1 penalty only; use --penalty l1".into()));
    }
    let prob = TwoStageProblem::load(&a.input)?;
    let z0 = start_point(&prob, a.start.as_deref())?;
    let mut opts = SolveOptions { escalate: a.escalate, max_iter: a.max_iter, ..SolveOptions::default() };
    if let Some(v) = a.tol_obj {
        opts.tol_obj = v;
    }
    if let Some(v) = a.tol_step {
        opts.tol_step = v;
    }
    if let Some(v) = a.tol_stat {
        opts.tol_stat = v;
    }
    if let Some(v) = a.tol_feas {
        opts.tol_feas = v;
    }
    let report: SolveReport = match a.solver {
        SolverArg::Dca => dca_solve(&prob, a.c, &z0, &opts)?,
        SolverArg::Cd => codiff_descent(&prob, a.c, &z0, &opts)?,
    };
    emit(a.output.as_deref(), &to_json(&report))?;
    eprintln!(
        "{}: {:?} after {} iterations, value {:.6e}, penalty term {:.3e}",
        report.solver, report.status, report.iterates, report.final_value, report.final_phi
    );
    Ok(if report.status.is_success() { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cmd_certify(a: &CertifyArgs) -> Result<i32> {
    let prob = TwoStageProblem::load(&a.input)?;
    let z = load_point_or_report(&a.point)?;
    let cert = if a.smooth { smooth_kkt_check(&prob, &z)? } else { check_optimality(&prob, a.c, &z, None)? };
    let inf_stationarity = if a.directions > 0 {
        Some(inf_stationarity_measure(&prob, a.c, &z, a.directions, a.seed)?)
    } else {
        None
    };
    emit(a.output.as_deref(), &to_json(&CertifyReport { certificate: &cert, inf_stationarity }))?;
    eprintln!("certificate: max residual {:.3e}", cert.residuals.max());
    Ok(EXIT_OK)
}

fn cmd_nondeg(a: &NondegArgs) -> Result<i32> {
    let prob = TwoStageProblem::load(&a.input)?;
    let report = check_nondegeneracy(&prob, a.samples, a.seed)?;
    emit(a.output.as_deref(), &to_json(&report))?;
    if report.degenerate {
        eprintln!("nondegeneracy violated: hull distance {:.3e}", report.min_hull_distance);
    }
    Ok(EXIT_OK)
}

fn cmd_generate(a: &GenerateArgs) -> Result<i32> {
    let mut spec = SizeSpec::new(a.d, a.m, a.s, a.l, a.dc);
    spec.smooth = a.smooth;
    let prob = generate(a.seed, spec)?;
    emit(a.output.as_deref(), &prob.to_json())?;
    Ok(EXIT_OK)
}

fn selftest() -> Result<i32> {
    let mut failures = 0;
    let mut check = |name: &str, ok: bool| {
        eprintln!("{} {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };
    let spec = SizeSpec::new(1, 1, 2, 1, false).smooth();
    let prob = generate(11, spec)?;
    check("generate is deterministic", prob == generate(11, spec)?);
    let z0 = start_point(&prob, None)?;
    let opts = SolveOptions::default();
    let dca = dca_solve(&prob, 10.0, &z0, &opts)?;
    let cd = codiff_descent(&prob, 10.0, &z0, &opts)?;
    check("dca converges", dca.status.is_success());
    check("descent converges", cd.status.is_success());
    check("solvers agree", (dca.final_value - cd.final_value).abs() <= 1e-4 * (1.0 + cd.final_value.abs()));
    let feasible = phi_l1(&prob, &cd.final_point)? <= 1e-6;
    check("solution is feasible", feasible);
    if feasible {
        let cert = check_optimality(&prob, 10.0, &cd.final_point, None)?;
        check("solution certifies", cert.residuals.max() <= 1e-4);
    }
    Ok(if failures == 0 { EXIT_OK } else { EXIT_FAILURE })
}

fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_FAILURE
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    configure_threads();
    let result = match &cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Certify(a) => cmd_certify(a),
        Command::CheckNondeg(a) => cmd_nondeg(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Selftest => selftest(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            exit_code(&e)
        }
    }
}

/// Parses `args` (program name first) and runs the command. Usage errors
/// exit with the validation code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
