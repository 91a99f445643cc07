//! Command-line driver for the convergence experiments: rate scans over
//! an n-grid, divergence scans for heavy-tailed mixtures, seeded audits of
//! the relative-entropy bound, cumulant tables, and the invariant
//! self-test suite.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure,
//! 3 self-test failure. The `QCLT_THREADS` environment variable caps the
//! worker pool used by grid sweeps (default: available parallelism).

#![forbid(unsafe_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use qclt_core::experiments::{
    audit_json, bound_audit, counterexample_scan, edgeworth_report, gnuplot_template,
    parse_metrics, parse_n_grid, parse_route, parse_state_spec, rate_csv_string, rate_scan,
    selftest, MixtureKind, ScanConfig,
};
use qclt_core::{Error, Result};

const STATE_SPEC_HELP: &str =
    "State spec: fock:K, super:a,b, thermal:nu=V, mixture:kind=trace|relent,theta=T, or file:PATH";

#[derive(Parser)]
#[command(name = "qclt", version, about = "Convergence experiments for iterated quantum convolutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan distances to the Gaussification over an n-grid and emit CSV
    Rates(RatesArgs),
    /// Test whether a scaled distance keeps growing along the grid for a
    /// heavy-tailed mixture family
    Counterexample(CounterexampleArgs),
    /// Stress the relative-entropy bound on seeded random states and emit
    /// a JSON report
    BoundAudit(BoundAuditArgs),
    /// Print the Weyl-ordered cumulants of a state up to a given order
    Edgeworth(EdgeworthArgs),
    /// Run the invariant suites (exit 3 on any failure)
    Selftest,
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long, help = STATE_SPEC_HELP)]
    state: String,
    /// Grid of convolution counts: "A:B:xF" (geometric) or "a,b,c"
    #[arg(long = "n-grid")]
    n_grid: Option<String>,
    /// Comma-separated subset of trace,relent,hs (default: all three)
    #[arg(long)]
    metrics: Option<String>,
    /// Convolution route: diagonal, char, or oracle (default: per state)
    #[arg(long)]
    route: Option<String>,
    /// Fock cutoff for realizing the state (default: per state)
    #[arg(long)]
    cutoff: Option<usize>,
    /// Phase-space grid radius for the char route
    #[arg(long)]
    radius: Option<f64>,
    /// Phase-space grid spacing for the dense char route
    #[arg(long)]
    step: Option<f64>,
    /// Seed echoed into the config line (scans themselves are deterministic)
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; a gnuplot script lands beside it (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CounterexampleArgs {
    /// Scaled metric to watch: trace (√n·trace_dist) or relent (n·relent)
    #[arg(long)]
    kind: String,
    /// Tail-weight parameter of the mixture family
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Grid of convolution counts: "A:B:xF" (geometric) or "a,b,c"
    #[arg(long = "n-grid", default_value = "64:4096:x2")]
    n_grid: String,
    /// Fock cutoff for realizing the mixture
    #[arg(long, default_value_t = 4096)]
    cutoff: usize,
    /// CSV output path; a gnuplot script lands beside it (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundAuditArgs {
    /// RNG seed; identical seeds reproduce the report byte-for-byte
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of states to audit
    #[arg(long, default_value_t = 50)]
    count: usize,
    /// Fock cutoff of the sampled states
    #[arg(long, default_value_t = 16)]
    cutoff: usize,
    /// JSON output path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EdgeworthArgs {
    #[arg(long, help = STATE_SPEC_HELP)]
    state: String,
    /// Largest total cumulant degree to report
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// Fock cutoff for realizing the state (default: per state)
    #[arg(long)]
    cutoff: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version exit clean; anything else is invalid input.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_class(&e))
        }
    }
}

/// 1 when the request itself is malformed, 2 when a well-formed request
/// failed numerically.
fn exit_class(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::Domain(_) | Error::Io(_) | Error::NoValidDensity(_) => 1,
        _ => 2,
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Rates(args) => run_rates(args),
        Command::Counterexample(args) => run_counterexample(args),
        Command::BoundAudit(args) => run_bound_audit(args),
        Command::Edgeworth(args) => run_edgeworth(args),
        Command::Selftest => Ok(run_selftest()),
    }
}

/// Writes the CSV to `out` plus a sibling `.gp` plot script, or streams it
/// to stdout when no path was given.
fn deliver_csv(csv: &str, out: Option<&Path>) -> Result<()> {
    match out {
        None => print!("{csv}"),
        Some(path) => {
            fs::write(path, csv)?;
            let script = path.with_extension("gp");
            let csv_name = path
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or("rates.csv");
            fs::write(&script, gnuplot_template(csv_name))?;
            println!("wrote {} and {}", path.display(), script.display());
        }
    }
    Ok(())
}

fn run_rates(args: RatesArgs) -> Result<ExitCode> {
    let mut config = ScanConfig::default_for(&args.state)?;
    if let Some(s) = &args.n_grid {
        config.n_grid = parse_n_grid(s)?;
    }
    if let Some(s) = &args.metrics {
        config.metrics = parse_metrics(s)?;
    }
    if let Some(s) = &args.route {
        config.route = parse_route(s)?;
    }
    if let Some(cutoff) = args.cutoff {
        config.cutoff = cutoff;
    }
    if let Some(radius) = args.radius {
        config.radius = radius;
    }
    if let Some(step) = args.step {
        config.step = step;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out = out.display().to_string();
    }
    config.validate()?;
    let records = rate_scan(&config)?;
    let csv = rate_csv_string(&config.config_line(), &records);
    deliver_csv(&csv, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn run_counterexample(args: CounterexampleArgs) -> Result<ExitCode> {
    let kind = MixtureKind::parse(&args.kind)?;
    let n_grid = parse_n_grid(&args.n_grid)?;
    let scan = counterexample_scan(kind, args.theta, &n_grid, args.cutoff)?;
    let grid: Vec<String> = n_grid.iter().map(|n| n.to_string()).collect();
    let config_line = format!(
        "counterexample kind={} theta={} n_grid={} cutoff={}",
        kind.tag(),
        args.theta,
        grid.join(","),
        args.cutoff
    );
    let csv = rate_csv_string(&config_line, &scan.records);
    deliver_csv(&csv, args.out.as_deref())?;
    let verdict = if scan.verdict { "diverging" } else { "bounded" };
    // The CSV owns stdout when no --out was given; park the verdict on
    // stderr there so the file format stays machine-readable.
    if args.out.is_some() {
        println!("verdict: {verdict}");
    } else {
        eprintln!("verdict: {verdict}");
    }
    Ok(ExitCode::SUCCESS)
}

fn run_bound_audit(args: BoundAuditArgs) -> Result<ExitCode> {
    let report = bound_audit(args.seed, args.count, args.cutoff)?;
    let json = audit_json(&report)?;
    match &args.out {
        None => print!("{json}"),
        Some(path) => {
            fs::write(path, &json)?;
            println!(
                "wrote {}; {} states, {} failures, worst margin {:.3e}",
                path.display(),
                report.count,
                report.failures.len(),
                report.worst_margin
            );
        }
    }
    // Bound violations are data, not process failures, but deserve noise.
    if !report.failures.is_empty() {
        eprintln!(
            "warning: the bound failed on {} of {} states",
            report.failures.len(),
            report.count
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn run_edgeworth(args: EdgeworthArgs) -> Result<ExitCode> {
    let spec = parse_state_spec(&args.state)?;
    let cutoff = match args.cutoff {
        Some(c) => c,
        None => ScanConfig::default_for(&args.state)?.cutoff,
    };
    let rows = edgeworth_report(&spec, args.order, cutoff)?;
    println!("# state={} order={} cutoff={}", args.state, args.order, cutoff);
    println!("p,q,re,im");
    for ((p, q), value) in rows {
        println!("{p},{q},{:+.12e},{:+.12e}", value.re, value.im);
    }
    Ok(ExitCode::SUCCESS)
}

fn run_selftest() -> ExitCode {
    let report = selftest();
    for check in &report.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", check.name, check.detail);
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        println!("selftest: all {} checks passed", report.checks.len());
        ExitCode::SUCCESS
    } else {
        println!("selftest: {failed} of {} checks failed", report.checks.len());
        ExitCode::from(3)
    }
}
