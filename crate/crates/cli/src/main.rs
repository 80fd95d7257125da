//! Command-line driver: runs the verification suites, solves single
//! problems, and re-renders stored reports.  Exit code 0 means every check
//! in the produced (or loaded) report passed; 1 means at least one check
//! failed; 2 means the run itself broke (bad config, I/O, solver error).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fraclap::geometry::StarDomain;
use fraclap::solver::{frac_normal_derivative, solve_dirichlet, ReactionSpec};
use fraclap::specfun::FracParams;
use fraclap::suites::{
    run_barrier_suite, run_identity_suite, run_maxprinciple_suite, run_stability_sweep, Report,
    SuiteConfig,
};
use serde::Deserialize;

/// Verification suites and a desk-scale solver for fractional torsion
/// problems on star-shaped domains.
#[derive(Parser)]
#[command(name = "fraclap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file (suite config for suite commands, solve config for
    /// `solve`); omit to use the built-in canonical config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory to write artifacts into (report JSON, CSV tables, fields).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Multiplies every tolerance of the active config.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,

    /// Cap for worker threads in parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Stdout rendering.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form identity checks: torsion profiles, constants, kernels.
    Identities,
    /// Barrier inequality checks on translated-ball overlaps.
    Barrier,
    /// Moving-planes checks: cap positivity, lower bounds, edge quotients.
    Maxprinciple,
    /// Eccentricity sweep of the four stability quantities.
    Stability,
    /// Solve a single Dirichlet problem and summarize the solution.
    Solve,
    /// Re-render a stored report and set the exit code from its summary.
    Report {
        /// Path to a report JSON file (falls back to --config).
        path: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Config for the `solve` subcommand.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveConfig {
    domain: StarDomain,
    s: f64,
    resolution: usize,
    #[serde(default)]
    reaction: ReactionConfig,
    /// Boundary samples for the fractional-normal-derivative summary.
    #[serde(default = "default_trace_points")]
    trace_points: usize,
    /// Where to store the solved field (defaults to `<out>/solution.field`).
    output: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReactionConfig {
    #[serde(default = "one")]
    c0: f64,
    #[serde(default)]
    c1: f64,
}

impl Default for ReactionConfig {
    fn default() -> Self {
        Self { c0: 1.0, c1: 0.0 }
    }
}

fn one() -> f64 {
    1.0
}

fn default_trace_points() -> usize {
    64
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match &cli.command {
        Command::Identities => run_suite(&cli, SuiteConfig::identity_default, run_identity_suite),
        Command::Barrier => run_suite(&cli, SuiteConfig::barrier_default, run_barrier_suite),
        Command::Maxprinciple => {
            run_suite(&cli, SuiteConfig::maxprinciple_default, run_maxprinciple_suite)
        }
        Command::Stability => run_suite(&cli, SuiteConfig::stability_default, run_stability_sweep),
        Command::Solve => run_solve(&cli),
        Command::Report { path } => run_report(&cli, path.as_deref()),
    }
}

fn run_suite(
    cli: &Cli,
    default: impl Fn() -> SuiteConfig,
    suite: impl Fn(&SuiteConfig) -> Result<Report, fraclap::suites::ConfigError>,
) -> Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str::<SuiteConfig>(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => default(),
    };
    if !(cli.tol_scale > 0.0) || !cli.tol_scale.is_finite() {
        bail!("--tol-scale must be a positive finite number");
    }
    cfg.tol_scale *= cli.tol_scale;
    let report = suite(&cfg).context("running the suite")?;
    render(cli, &report)?;
    write_artifacts(cli, &report)?;
    Ok(exit_from(&report))
}

fn run_solve(cli: &Cli) -> Result<ExitCode> {
    let path = cli
        .config
        .as_ref()
        .context("`solve` needs --config pointing at a solve config")?;
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg: SolveConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;

    let params = FracParams::new(cfg.domain.dimension, cfg.s).context("invalid parameters")?;
    let reaction = ReactionSpec::affine(cfg.reaction.c0, cfg.reaction.c1);
    let u = solve_dirichlet(&cfg.domain, &reaction, &params, cfg.resolution)
        .context("solving the Dirichlet problem")?;
    let trace =
        frac_normal_derivative(&u, cfg.trace_points).context("fitting the boundary trace")?;

    let nodes = u.masked_indices().len();
    let summary = serde_json::json!({
        "dimension": cfg.domain.dimension,
        "s": cfg.s,
        "resolution": cfg.resolution,
        "h": u.h,
        "interior_nodes": nodes,
        "sup": u.masked_sup(),
        "trace_oscillation": trace.oscillation(),
        "trace_samples": trace.values.len(),
    });
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&summary)?),
        Format::Csv => {
            println!("dimension,s,resolution,h,interior_nodes,sup,trace_oscillation");
            println!(
                "{},{},{},{},{},{},{}",
                cfg.domain.dimension,
                cfg.s,
                cfg.resolution,
                u.h,
                nodes,
                u.masked_sup(),
                trace.oscillation()
            );
        }
    }

    let target = match (&cfg.output, &cli.out) {
        (Some(path), _) => Some(path.clone()),
        (None, Some(dir)) => Some(dir.join("solution.field")),
        (None, None) => None,
    };
    if let Some(path) = target {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        u.save(&path)
            .with_context(|| format!("writing the field to {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run_report(cli: &Cli, path: Option<&std::path::Path>) -> Result<ExitCode> {
    let path = path
        .or(cli.config.as_deref())
        .context("`report` needs a report path (positional or --config)")?;
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading report {}", path.display()))?;
    let report = Report::from_json(&text)
        .with_context(|| format!("parsing report {}", path.display()))?;
    render(cli, &report)?;
    write_artifacts(cli, &report)?;
    Ok(exit_from(&report))
}

fn render(cli: &Cli, report: &Report) -> Result<()> {
    match cli.format {
        Format::Json => println!("{}", report.to_json()),
        Format::Csv => {
            print!("{}", report.checks_csv());
            if let Some(table) = &report.table {
                println!();
                print!("{}", table.to_csv());
            }
        }
    }
    Ok(())
}

fn write_artifacts(cli: &Cli, report: &Report) -> Result<()> {
    if let Some(dir) = &cli.out {
        let written = report
            .write_artifacts(dir, true)
            .with_context(|| format!("writing artifacts under {}", dir.display()))?;
        for path in written {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn exit_from(report: &Report) -> ExitCode {
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
