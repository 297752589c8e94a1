use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use funceq_core::corpus::{self, RunRecord};
use funceq_core::hypotheses::HypothesisReport;
use funceq_core::operator::{verify_change_of_variables, EquationSpec, MapSpec};
use funceq_core::solver::{neumann_solve, residual};
use funceq_core::{parse, Expr, GridFunction, ParseError, Status, DEFAULT_RESOLUTION};
use thiserror::Error;

use crate::exit;
use crate::output::{self, CovReport, HintSource, SolveReport, VerifyReport};
use crate::specfile::{SpecFile, SpecFileError};

/// Residual accepted by `verify`.
pub const VERIFY_THRESHOLD: f64 = 1e-3;
/// Change-of-variables defect accepted by `cov`.
pub const COV_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "funceq", version, about = "Solve and check phi = P phi + g on [0, 1]")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report K, L, C and the contraction conditions of an equation file.
    Check {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Largest power of P inspected by the per-map criterion.
        #[arg(long, default_value_t = 40)]
        k_max: usize,
    },
    /// Sum the Neumann series of an equation file.
    Solve {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the iteration trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the computed solution as CSV.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Check a candidate solution against an equation file.
    Verify {
        spec: PathBuf,
        /// Candidate solution as an expression in x.
        #[arg(long)]
        reference: String,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Compare both sides of the change-of-variables identity for a map.
    Cov {
        /// The map f.
        #[arg(long)]
        f: String,
        /// A nonnegative integrand h (in the variable x).
        #[arg(long)]
        h: String,
        /// Breakpoints of f; detected automatically when omitted.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        breakpoints: Option<Vec<f64>>,
        /// Integration interval `a,b`.
        #[arg(long, value_parser = parse_interval, default_value = "0,1")]
        interval: (f64, f64),
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// List or run the built-in instances.
    Corpus(CorpusArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Grid resolution; overrides the file's `M`.
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-6, value_parser = parse_tolerance)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iter: u64,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("action").required(true).args(["list", "run"])))]
pub struct CorpusArgs {
    /// Print entries, parameters and provenance.
    #[arg(long)]
    pub list: bool,
    /// Solve every entry at its defaults and compare with expectations.
    #[arg(long)]
    pub run: bool,
    #[arg(long, default_value_t = 1e-6, value_parser = parse_tolerance)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iter: u64,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    pub resolution: usize,
    /// Replace an entry's closed-form solution: `NAME=EXPR`.
    #[arg(long, value_name = "NAME=EXPR")]
    pub oracle: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

fn parse_tolerance(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("tolerance must be positive and finite, got {s}"))
    }
}

fn parse_interval(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `a,b`")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("`{a}` is not a number"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("`{b}` is not a number"))?;
    if 0.0 <= a && a < b && b <= 1.0 {
        Ok((a, b))
    } else {
        Err(format!("need 0 <= a < b <= 1, got {a},{b}"))
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Spec(#[from] SpecFileError),
    #[error("--{flag}: {}", describe_parse(.source, .text))]
    Expr {
        flag: &'static str,
        text: String,
        source: ParseError,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] funceq_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Stdout(#[from] std::io::Error),
}

fn describe_parse(e: &ParseError, text: &str) -> String {
    format!("{} at position {} in `{text}`", e.message, e.position)
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Spec(_) | CliError::Expr { .. } | CliError::Usage(_) => exit::USAGE,
            CliError::Core(_) => exit::DATA,
            CliError::Io { .. } | CliError::Csv(_) | CliError::Json(_) | CliError::Stdout(_) => exit::FAILED,
        }
    }
}

type CliResult = Result<u8, CliError>;

fn parse_flag(flag: &'static str, text: &str) -> Result<Expr, CliError> {
    parse(text).map_err(|source| CliError::Expr {
        flag,
        text: text.to_string(),
        source,
    })
}

fn load(path: &Path, resolution: Option<usize>) -> Result<EquationSpec, CliError> {
    let file = SpecFile::load(path)?;
    file.to_equation(resolution).map_err(|source| {
        SpecFileError::Invalid {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_json<W: Write, T: serde::Serialize>(out: &mut W, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Contraction constant for stopping: the file's `C_hint`, else the
/// estimated `C` when it is below one.
fn contraction_hint(spec: &EquationSpec) -> Result<(Option<f64>, HintSource), CliError> {
    if let Some(c) = spec.c_hint() {
        return Ok((Some(c), HintSource::File));
    }
    let report = HypothesisReport::check(spec)?;
    Ok((report.contraction_constant(), HintSource::Estimated))
}

pub fn execute<W: Write>(cli: &Cli, out: &mut W) -> CliResult {
    match &cli.command {
        Command::Check { spec, common, k_max } => check(spec, common, *k_max, out),
        Command::Solve {
            spec,
            common,
            solver,
            trace,
            solution,
        } => solve(spec, common, solver, trace.as_deref(), solution.as_deref(), out),
        Command::Verify {
            spec,
            reference,
            common,
            solver,
        } => verify(spec, reference, common, solver, out),
        Command::Cov {
            f,
            h,
            breakpoints,
            interval,
            resolution,
            format,
        } => cov(f, h, breakpoints.as_deref(), *interval, *resolution, *format, out),
        Command::Corpus(args) => run_corpus(args, out),
    }
}

fn check<W: Write>(path: &Path, common: &Common, k_max: usize, out: &mut W) -> CliResult {
    let spec = load(path, common.resolution)?;
    let report = HypothesisReport::check_with(&spec, k_max)?;
    match common.format {
        Format::Text => write!(out, "{report}")?,
        Format::Json => write_json(out, &report)?,
    }
    Ok(if report.holds_c {
        exit::OK
    } else if report.local_witness().is_some() {
        exit::WITNESS_ONLY
    } else {
        exit::NO_GUARANTEE
    })
}

fn solve<W: Write>(
    path: &Path,
    common: &Common,
    args: &SolverArgs,
    trace: Option<&Path>,
    solution: Option<&Path>,
    out: &mut W,
) -> CliResult {
    let spec = load(path, common.resolution)?;
    let (c_hint, source) = contraction_hint(&spec)?;
    let result = neumann_solve(&spec, args.tol, args.max_iter as usize, c_hint)?;
    if let Some(p) = trace {
        output::write_trace(&result, create(p)?)?;
    }
    if let Some(p) = solution {
        output::write_solution(&result.phi0, create(p)?)?;
    }
    let report = SolveReport::new(&result, source);
    match common.format {
        Format::Text => report.write_text(&mut *out)?,
        Format::Json => write_json(out, &report)?,
    }
    Ok(match result.status {
        Status::Converged | Status::FiniteSum => exit::OK,
        Status::DivergentOscillating | Status::DivergentGrowing => exit::DIVERGENT,
        Status::MaxIterReached => exit::MAX_ITER,
    })
}

fn verify<W: Write>(path: &Path, reference: &str, common: &Common, args: &SolverArgs, out: &mut W) -> CliResult {
    let spec = load(path, common.resolution)?;
    let expr = parse_flag("reference", reference)?;
    let sampled = GridFunction::sample(&expr, spec.resolution())?;
    let res = residual(&spec, &sampled)?;
    let (c_hint, _) = contraction_hint(&spec)?;
    let result = neumann_solve(&spec, args.tol, args.max_iter as usize, c_hint)?;
    let l1_distance = if result.status.is_success() {
        Some(result.phi0.l1_distance(&sampled)?)
    } else {
        None
    };
    let report = VerifyReport {
        reference: expr.to_string(),
        residual: res,
        solve_status: result.status,
        l1_distance,
        passed: res <= VERIFY_THRESHOLD,
    };
    match common.format {
        Format::Text => report.write_text(&mut *out)?,
        Format::Json => write_json(out, &report)?,
    }
    Ok(if report.passed { exit::OK } else { exit::FAILED })
}

fn cov<W: Write>(
    f: &str,
    h: &str,
    breakpoints: Option<&[f64]>,
    interval: (f64, f64),
    m: usize,
    format: Format,
    out: &mut W,
) -> CliResult {
    let f_expr = parse_flag("f", f)?;
    let h_expr = parse_flag("h", h)?;
    let map = match breakpoints {
        Some(bps) => MapSpec::with_breakpoints(f_expr.clone(), bps, m),
        None => MapSpec::new(f_expr.clone(), m),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let cov = verify_change_of_variables(&map, &h_expr, interval, m)?;
    let report = CovReport {
        map: f_expr.to_string(),
        h: h_expr.to_string(),
        interval,
        lhs: cov.lhs,
        rhs: cov.rhs,
        difference: cov.defect(),
        flat_pieces: cov.flat_pieces,
        passed: cov.defect() <= COV_THRESHOLD,
    };
    match format {
        Format::Text => report.write_text(&mut *out)?,
        Format::Json => write_json(out, &report)?,
    }
    Ok(if report.passed { exit::OK } else { exit::FAILED })
}

fn run_corpus<W: Write>(args: &CorpusArgs, out: &mut W) -> CliResult {
    if args.list {
        return list_corpus(args.format, out);
    }
    let mut overrides = Vec::new();
    for item in &args.oracle {
        let (name, text) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--oracle expects NAME=EXPR, got `{item}`")))?;
        corpus::entry(name.trim()).map_err(|e| CliError::Usage(e.to_string()))?;
        overrides.push((name.trim().to_string(), parse_flag("oracle", text)?));
    }
    let mut instances = corpus::defaults(args.resolution)?;
    for inst in &mut instances {
        if let Some((_, e)) = overrides.iter().rev().find(|(n, _)| n == inst.name) {
            inst.oracle = Some(e.clone());
            inst.oracle_integrable = true;
        }
    }
    let records: Vec<RunRecord> = instances
        .iter()
        .map(|inst| corpus::run_instance(inst, args.tol, args.max_iter as usize))
        .collect();
    match args.format {
        Format::Text => output::write_run_table(&records, &mut *out)?,
        Format::Json => write_json(out, &records)?,
    }
    Ok(if records.iter().all(|r| r.passed) {
        exit::OK
    } else {
        exit::FAILED
    })
}

fn list_corpus<W: Write>(format: Format, out: &mut W) -> CliResult {
    #[derive(serde::Serialize)]
    struct Listed {
        name: &'static str,
        provenance: &'static str,
        params: Vec<(&'static str, f64, String)>,
    }
    let listed: Vec<Listed> = corpus::entries()
        .iter()
        .map(|e| Listed {
            name: e.name,
            provenance: e.provenance,
            params: e
                .params
                .iter()
                .map(|p| (p.name, p.default, p.range.to_string()))
                .collect(),
        })
        .collect();
    match format {
        Format::Json => write_json(out, &listed)?,
        Format::Text => {
            for e in &listed {
                writeln!(out, "{} ({})", e.name, e.provenance)?;
                for (name, default, range) in &e.params {
                    writeln!(out, "    {name} = {default}  range {range}")?;
                }
            }
        }
    }
    Ok(exit::OK)
}
