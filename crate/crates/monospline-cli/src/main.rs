//! Command-line driver for monotone-spline L^p approximation.
//!
//! Four subcommands cover the library surface:
//!
//! * `approx` — fit one spline and write it (JSON) plus a residual curve (CSV);
//! * `converge` — sweep a partition sequence and write the convergence report;
//! * `check-markov` — run the randomized polynomial-inequality suites;
//! * `counterexample` — emit the `x^n` table (L^p norms shrink, sup stays 1).
//!
//! Exit codes: 0 ok, 2 configuration error, 3 solver failure,
//! 4 invariant violation. Every command is deterministic given its flags
//! (including `--seed`); rerunning writes byte-identical artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use monospline::partition::{self, PartitionKind};
use monospline::poly::{run_markov_inequality_suite, run_markov_lemma_suite, Polynomial};
use monospline::{
    builtin, builtin_functions, counterexample_xn, project, run_convergence, AnalysisError,
    ApproxConfig, ApproxError, ConvergenceReport, Partition, ProjectionResult, TargetFunction,
};
use thiserror::Error;

// ---------------------------------------------------------------------------
// Error / exit-code plumbing
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
enum CliError {
    /// Bad flags, bad input files, unwritable output paths — exit 2.
    #[error("{0}")]
    Config(String),
    /// The solver failed or exhausted its budget — exit 3.
    #[error("{0}")]
    Solver(String),
    /// A mathematical invariant the command certifies did not hold — exit 4.
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

fn approx_err(e: ApproxError) -> CliError {
    match e {
        ApproxError::ConfigInvalid(_)
        | ApproxError::TagViolation { .. }
        | ApproxError::InstanceTooLarge { .. } => CliError::Config(e.to_string()),
        _ => CliError::Solver(e.to_string()),
    }
}

fn analysis_err(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::Approx(inner) => approx_err(inner),
        other => CliError::Config(other.to_string()),
    }
}

// ---------------------------------------------------------------------------
// Flags
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "monospline",
    about = "Best L^p approximation by nondecreasing C^l piecewise polynomials",
    version
)]
struct Cli {
    /// Worker threads for independent projections (fallback: MONOSPLINE_WORKERS).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one spline; writes spline.json and residuals.csv, prints a summary line.
    Approx(ApproxCmd),
    /// Fit a whole partition sequence; writes report.csv/json and error_curves.csv.
    Converge(ConvergeCmd),
    /// Run the randomized monotone-polynomial and classical Markov suites.
    CheckMarkov(CheckMarkovCmd),
    /// Emit the x^n table: L^p norms shrink to 0 while the sup norm stays 1.
    Counterexample(CounterexampleCmd),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct TargetSel {
    /// Builtin target id: identity, constant, square, sqrt, cbrt, smoothstep, plateau, exp.
    #[arg(long)]
    function: Option<String>,
    /// CSV of x,y samples (strictly increasing x, nondecreasing y) used as a
    /// piecewise-linear target.
    #[arg(long, value_name = "PATH")]
    input_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DomainOpts {
    /// Left endpoint; reparametrizes the target onto [a, b] (requires --b).
    #[arg(long, requires = "b")]
    a: Option<f64>,
    /// Right endpoint; reparametrizes the target onto [a, b] (requires --a).
    #[arg(long, requires = "a")]
    b: Option<f64>,
}

#[derive(Debug, Args)]
struct FitOpts {
    /// Order: polynomial degree bound per piece.
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Global smoothness: fits are C^l across knots (l + 1 <= m).
    #[arg(long, default_value_t = 0)]
    l: usize,
    /// L^p exponent (p >= 1).
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Solver tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Bernstein degree-elevation budget for certification and cone rows.
    #[arg(long, default_value_t = 6)]
    elevation: usize,
}

impl FitOpts {
    fn config(&self) -> ApproxConfig {
        let mut cfg = ApproxConfig::new(self.p, self.m, self.l);
        cfg.solver_tolerance = self.tol;
        cfg.elevation_budget = self.elevation;
        cfg
    }
}

#[derive(Debug, Args)]
struct PartitionOpts {
    /// Knot layout.
    #[arg(long, default_value = "uniform", value_parser = parse_kind)]
    partition: PartitionKind,
    /// Seed for random partitions (and anything else randomized).
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Args)]
struct OutputOpts {
    /// Directory for artifacts (created if missing).
    #[arg(long, default_value = "out", value_name = "DIR")]
    out_dir: PathBuf,
    /// Artifact formats (comma-separated).
    #[arg(long, value_delimiter = ',', default_values = ["csv", "json"])]
    format: Vec<Format>,
}

impl OutputOpts {
    fn wants(&self, f: Format) -> bool {
        self.format.contains(&f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Comma-separated sizes; each item is a number or an inclusive range `A..B`.
#[derive(Debug, Clone)]
struct Sizes(Vec<usize>);

impl FromStr for Sizes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Vec::new();
        for item in s.split(',') {
            let item = item.trim();
            if item.is_empty() {
                return Err("empty size entry".into());
            }
            if let Some((lo, hi)) = item.split_once("..") {
                let lo: usize = lo
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad size `{item}`"))?;
                let hi: usize = hi
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad size `{item}`"))?;
                if hi < lo {
                    return Err(format!("empty range `{item}`"));
                }
                out.extend(lo..=hi);
            } else {
                out.push(item.parse().map_err(|_| format!("bad size `{item}`"))?);
            }
        }
        Ok(Sizes(out))
    }
}

fn parse_kind(s: &str) -> Result<PartitionKind, String> {
    PartitionKind::from_str(s)
}

#[derive(Debug, Args)]
struct ApproxCmd {
    #[command(flatten)]
    target: TargetSel,
    #[command(flatten)]
    domain: DomainOpts,
    #[command(flatten)]
    fit: FitOpts,
    #[command(flatten)]
    part: PartitionOpts,
    /// Partition size (number of knots); exactly one entry.
    #[arg(long, default_value = "9")]
    sizes: Sizes,
    #[command(flatten)]
    out: OutputOpts,
}

#[derive(Debug, Args)]
struct ConvergeCmd {
    #[command(flatten)]
    target: TargetSel,
    #[command(flatten)]
    domain: DomainOpts,
    #[command(flatten)]
    fit: FitOpts,
    #[command(flatten)]
    part: PartitionOpts,
    /// Partition sizes, strictly increasing (e.g. 5,9,17,33,65).
    #[arg(long, default_value = "5,9,17,33,65")]
    sizes: Sizes,
    /// Inner observation window: [a + f*(b-a), b - f*(b-a)], 0 <= f < 0.5.
    #[arg(long, default_value_t = 0.1, value_name = "F")]
    inner_fraction: f64,
    #[command(flatten)]
    out: OutputOpts,
}

#[derive(Debug, Args)]
struct CheckMarkovCmd {
    /// Restrict the lemma suite to one degree bound (default: 1..=5).
    #[arg(long)]
    m: Option<usize>,
    /// Seed for the randomized suites.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CounterexampleCmd {
    /// L^p exponent (p >= 1).
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Exponents n for the x^n table.
    #[arg(long, default_value = "1..99")]
    sizes: Sizes,
    #[command(flatten)]
    out: OutputOpts,
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(workers) = resolve_workers(cli.workers)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?;
    }
    match cli.command {
        Command::Approx(cmd) => cmd_approx(cmd),
        Command::Converge(cmd) => cmd_converge(cmd),
        Command::CheckMarkov(cmd) => cmd_check_markov(cmd),
        Command::Counterexample(cmd) => cmd_counterexample(cmd),
    }
}

fn resolve_workers(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    let workers = match flag {
        Some(w) => Some(w),
        None => match std::env::var("MONOSPLINE_WORKERS") {
            Ok(v) => Some(v.parse().map_err(|_| {
                CliError::Config(format!(
                    "MONOSPLINE_WORKERS must be a positive integer, got `{v}`"
                ))
            })?),
            Err(_) => None,
        },
    };
    if workers == Some(0) {
        return Err(CliError::Config("--workers must be >= 1".into()));
    }
    Ok(workers)
}

// ---------------------------------------------------------------------------
// Target resolution
// ---------------------------------------------------------------------------

fn builtin_ids() -> String {
    builtin_functions()
        .iter()
        .map(|f| f.id().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn resolve_target(sel: &TargetSel, dom: &DomainOpts) -> Result<TargetFunction, CliError> {
    let base = if let Some(id) = &sel.function {
        builtin(id).ok_or_else(|| {
            CliError::Config(format!(
                "unknown --function `{id}` (builtins: {})",
                builtin_ids()
            ))
        })?
    } else {
        let path = sel
            .input_csv
            .as_ref()
            .expect("clap enforces one target source");
        load_samples(path)?
    };
    match (dom.a, dom.b) {
        (Some(a), Some(b)) => base.on_interval(a, b).map_err(approx_err),
        _ => Ok(base),
    }
}

/// Reads `x,y` sample rows; a non-numeric first line is treated as a header.
fn load_samples(path: &Path) -> Result<TargetFunction, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',').map(str::trim);
        let parsed = match (cells.next(), cells.next()) {
            (Some(x), Some(y)) => x.parse::<f64>().and_then(|x| Ok((x, y.parse::<f64>()?))),
            _ => {
                return Err(CliError::Config(format!(
                    "{}:{}: expected `x,y`, got `{line}`",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        match parsed {
            Ok(pt) => points.push(pt),
            Err(_) if lineno == 0 => continue, // header row
            Err(_) => {
                return Err(CliError::Config(format!(
                    "{}:{}: expected numeric `x,y`, got `{line}`",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    TargetFunction::from_samples(&points).map_err(approx_err)
}

fn build_partitions(
    opts: &PartitionOpts,
    target: &TargetFunction,
    sizes: &[usize],
) -> Result<Vec<Partition>, CliError> {
    partition::sequence(opts.partition, target.a(), target.b(), sizes, opts.seed)
        .map_err(|e| CliError::Config(e.to_string()))
}

// ---------------------------------------------------------------------------
// Artifact helpers
// ---------------------------------------------------------------------------

fn write_text(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("all artifact types serialize");
    s.push('\n');
    s
}

/// `x,f,s` triples on a 1001-point grid — the residual curve for plotting.
fn residual_curve(f: &TargetFunction, result: &ProjectionResult) -> String {
    let mut out = String::from("x,f,s\n");
    let (a, b) = (f.a(), f.b());
    for i in 0..=1000 {
        let x = if i == 1000 {
            b
        } else {
            a + (b - a) * i as f64 / 1000.0
        };
        let s = result.spline.eval(x).expect("grid point inside the domain");
        let _ = writeln!(out, "{},{},{}", x, f.eval(x), s);
    }
    out
}

/// Mesh norm against every error column, one row per partition
/// (log-log friendly; the bound column is empty when undefined).
fn error_curves(report: &ConvergenceReport) -> String {
    let mut out =
        String::from("norm,lp_error,sup_global,sup_inner,endpoint_a,endpoint_b,interp_bound\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.partition_norm,
            r.lp_error,
            r.sup_error_global,
            r.sup_error_inner,
            r.endpoint_a,
            r.endpoint_b,
            r.interp_bound.map(|v| v.to_string()).unwrap_or_default()
        );
    }
    out
}

fn fmt_poly(p: &Polynomial) -> String {
    format!("coefficients (ascending) {:?}", p.coeffs())
}

// ---------------------------------------------------------------------------
// approx
// ---------------------------------------------------------------------------

fn cmd_approx(cmd: ApproxCmd) -> Result<(), CliError> {
    let target = resolve_target(&cmd.target, &cmd.domain)?;
    let cfg = cmd.fit.config();
    if cmd.sizes.0.len() != 1 {
        return Err(CliError::Config(format!(
            "--sizes must contain exactly one entry for approx, got {}",
            cmd.sizes.0.len()
        )));
    }
    let parts = build_partitions(&cmd.part, &target, &cmd.sizes.0)?;

    let (result, converged) = match project(&target, &parts[0], &cfg) {
        Ok(r) => (r, true),
        Err(ApproxError::NonConvergence { result, .. }) => (*result, false),
        Err(e) => return Err(approx_err(e)),
    };

    write_text(&cmd.out.out_dir, "spline.json", &to_json(&result))?;
    write_text(
        &cmd.out.out_dir,
        "residuals.csv",
        &residual_curve(&target, &result),
    )?;

    println!(
        "function={} p={} m={} l={} objective={:.6e} optimality_gap={:.3e} iterations={} converged={}",
        target.id(), cfg.p, cfg.m, cfg.l,
        result.objective, result.optimality_gap, result.iterations, converged
    );
    if converged {
        Ok(())
    } else {
        Err(CliError::Solver(format!(
            "tolerance not met after {} iterations (artifacts still written to {})",
            result.iterations,
            cmd.out.out_dir.display()
        )))
    }
}

// ---------------------------------------------------------------------------
// converge
// ---------------------------------------------------------------------------

fn cmd_converge(cmd: ConvergeCmd) -> Result<(), CliError> {
    let target = resolve_target(&cmd.target, &cmd.domain)?;
    let cfg = cmd.fit.config();
    if cfg.m < 2 * cfg.l + 1 {
        eprintln!(
            "warning: m = {} < 2l + 1 = {}: the interpolant-based error bound is undefined; \
             the interp_bound column is left empty",
            cfg.m,
            2 * cfg.l + 1
        );
    }
    if !(0.0..0.5).contains(&cmd.inner_fraction) {
        return Err(CliError::Config(format!(
            "--inner-fraction must lie in [0, 0.5), got {}",
            cmd.inner_fraction
        )));
    }
    let parts = build_partitions(&cmd.part, &target, &cmd.sizes.0)?;
    let inner = if cmd.inner_fraction == 0.0 {
        (target.a(), target.b())
    } else {
        let span = target.b() - target.a();
        (
            target.a() + cmd.inner_fraction * span,
            target.b() - cmd.inner_fraction * span,
        )
    };

    let report = run_convergence(&target, &parts, &cfg, inner).map_err(analysis_err)?;

    if cmd.out.wants(Format::Csv) {
        write_text(&cmd.out.out_dir, "report.csv", &report.to_csv())?;
        write_text(&cmd.out.out_dir, "error_curves.csv", &error_curves(&report))?;
    }
    if cmd.out.wants(Format::Json) {
        write_text(&cmd.out.out_dir, "report.json", &to_json(&report))?;
    }

    // Rowwise invariants this command certifies: the measured L^p error sits
    // under the interpolant-based bound (when defined), and the error over
    // the inner window never exceeds the global one.
    let csv = report.to_csv();
    for (row, rendered) in report.rows.iter().zip(csv.lines().skip(1)) {
        if let Some(bound) = row.interp_bound {
            if row.lp_error > bound + 1e-6 {
                println!("{rendered}");
                return Err(CliError::Invariant(format!(
                    "lp_error {} exceeds the bound {} at size {}",
                    row.lp_error, bound, row.partition_size
                )));
            }
        }
        if row.sup_error_inner > row.sup_error_global + 1e-9 {
            println!("{rendered}");
            return Err(CliError::Invariant(format!(
                "sup_inner {} exceeds sup_global {} at size {}",
                row.sup_error_inner, row.sup_error_global, row.partition_size
            )));
        }
    }

    let last = report.rows.last().expect("sequence is nonempty");
    println!(
        "function={} p={} m={} l={} rows={} final_norm={:.6e} final_sup_global={:.6e} artifacts={}",
        report.function,
        report.p,
        report.m,
        report.l,
        report.rows.len(),
        last.partition_norm,
        last.sup_error_global,
        cmd.out.out_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// check-markov
// ---------------------------------------------------------------------------

const SUITE_COUNT: usize = 1000;

fn cmd_check_markov(cmd: CheckMarkovCmd) -> Result<(), CliError> {
    let degrees: Vec<usize> = match cmd.m {
        Some(m) if (1..=5).contains(&m) => vec![m],
        Some(m) => {
            return Err(CliError::Config(format!("--m must lie in 1..=5, got {m}")));
        }
        None => (1..=5).collect(),
    };

    let mut failure: Option<String> = None;
    for m in degrees {
        let rep = run_markov_lemma_suite(m, SUITE_COUNT, cmd.seed);
        println!(
            "lemma m={m}: {}/{} pass, worst slack {:.9e}, worst relative slack {:.9}",
            rep.count - rep.violations,
            rep.count,
            rep.min_slack,
            rep.min_relative_slack
        );
        if rep.violations > 0 {
            if let Some((p, (a, b))) = &rep.extremal {
                println!("offending polynomial on [{a}, {b}]: {}", fmt_poly(p));
            }
            failure.get_or_insert_with(|| {
                format!("{} lemma violations at degree bound {m}", rep.violations)
            });
        }
    }

    let ineq = run_markov_inequality_suite(SUITE_COUNT, cmd.seed);
    println!(
        "inequality: {}/{} pass, max derivative ratio {:.9}",
        ineq.count - ineq.violations,
        ineq.count,
        ineq.max_ratio
    );
    if ineq.violations > 0 {
        if let Some(p) = &ineq.extremal {
            println!("offending polynomial on [-1, 1]: {}", fmt_poly(p));
        }
        failure
            .get_or_insert_with(|| format!("{} classical-inequality violations", ineq.violations));
    }

    match failure {
        None => Ok(()),
        Some(msg) => Err(CliError::Invariant(msg)),
    }
}

// ---------------------------------------------------------------------------
// counterexample
// ---------------------------------------------------------------------------

fn cmd_counterexample(cmd: CounterexampleCmd) -> Result<(), CliError> {
    let ns: Vec<u32> = cmd
        .sizes
        .0
        .iter()
        .map(|&n| u32::try_from(n).map_err(|_| CliError::Config(format!("exponent {n} too large"))))
        .collect::<Result<_, _>>()?;
    let rows = counterexample_xn(&ns, cmd.p).map_err(analysis_err)?;

    let mut csv = String::from("n,lp_norm,lp_norm_quadrature,sup_norm\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            r.n, r.lp_norm, r.lp_norm_quadrature, r.sup_norm
        );
    }
    if cmd.out.wants(Format::Csv) {
        write_text(&cmd.out.out_dir, "counterexample.csv", &csv)?;
    }
    if cmd.out.wants(Format::Json) {
        write_text(&cmd.out.out_dir, "counterexample.json", &to_json(&rows))?;
    }

    // The command certifies the defining tension: sup norm pinned at 1 while
    // the L^p column is strictly decreasing.
    for r in &rows {
        if !(1.0 - 1e-9..=1.0 + 1e-12).contains(&r.sup_norm) {
            println!(
                "{},{},{},{}",
                r.n, r.lp_norm, r.lp_norm_quadrature, r.sup_norm
            );
            return Err(CliError::Invariant(format!(
                "sup norm {} at n = {} is not pinned at 1",
                r.sup_norm, r.n
            )));
        }
    }
    for w in rows.windows(2) {
        if w[1].lp_norm >= w[0].lp_norm || w[1].lp_norm_quadrature >= w[0].lp_norm_quadrature {
            println!(
                "{},{},{},{}",
                w[1].n, w[1].lp_norm, w[1].lp_norm_quadrature, w[1].sup_norm
            );
            return Err(CliError::Invariant(format!(
                "L^p column is not strictly decreasing between n = {} and n = {}",
                w[0].n, w[1].n
            )));
        }
    }

    let (first, last) = (rows.first(), rows.last());
    if let (Some(first), Some(last)) = (first, last) {
        println!(
            "rows={} p={} lp[{}]={:.6e} lp[{}]={:.6e} sup constant at 1",
            rows.len(),
            cmd.p,
            first.n,
            first.lp_norm_quadrature,
            last.n,
            last.lp_norm_quadrature
        );
    } else {
        println!("rows=0 p={}", cmd.p);
    }
    Ok(())
}
