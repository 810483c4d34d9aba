//! Command-line driver for the edge-agreement simulator.
//!
//! Verbs:
//!   run <config>      simulate the closed loop and write the result file set
//!   cert <config>     build and print the stability certificate only
//!   verify-fixture    check the library against the built-in reference graph
//!
//! Exit codes: 0 success, 1 validation error (bad arguments, bad config, or a
//! failing fixture check), 2 infeasible certificate, 3 divergence.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use edge_agreement::config::{parse_config, RunConfig};
use edge_agreement::fixture::verify_fixture;
use edge_agreement::runner::{certificate_report, run_experiment, ExperimentResult};
use edge_agreement::{Error, Result};

#[derive(Parser)]
#[command(
    name = "edge-agreement",
    version,
    about = "Second-order multi-agent edge agreement with dynamically quantized relative measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the closed loop a config file describes and write the
    /// trace/summary file set.
    Run {
        /// Path to a `key = value` config file.
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long, value_name = "dir")]
        out: Option<PathBuf>,
        /// Override the configured RNG seed for the initial conditions.
        #[arg(long, value_name = "u64")]
        seed: Option<u64>,
        /// Override the configured integration step (seconds).
        #[arg(long, value_name = "s")]
        dt: Option<f64>,
    },
    /// Build the stability certificate only (no simulation) and print its
    /// constants and the feasibility verdict.
    Cert {
        /// Path to a `key = value` config file.
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long, value_name = "dir")]
        out: Option<PathBuf>,
        /// Override the configured RNG seed for the initial conditions.
        #[arg(long, value_name = "u64")]
        seed: Option<u64>,
        /// Override the configured integration step (seconds).
        #[arg(long, value_name = "s")]
        dt: Option<f64>,
    },
    /// Recompute the reduction matrices and certificate constants for the
    /// built-in five-node graph and compare them against the embedded
    /// reference values.
    VerifyFixture,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version print to stdout and succeed; genuine usage
            // errors exit 1. (clap's default usage-error code is 2, which is
            // reserved here for an infeasible certificate.)
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            dt,
        } => {
            let cfg = load_config(&config, out, seed, dt)?;
            let result = run_experiment(&cfg)?;
            print_run_report(&result);
            Ok(if result.outcome.aborted.is_some() {
                3
            } else {
                0
            })
        }
        Command::Cert {
            config,
            out,
            seed,
            dt,
        } => {
            let cfg = load_config(&config, out, seed, dt)?;
            let (text, feasible) = certificate_report(&cfg)?;
            print!("{text}");
            Ok(if feasible { 0 } else { 2 })
        }
        Command::VerifyFixture => {
            let report = verify_fixture()?;
            println!("{report}");
            Ok(if report.all_pass() { 0 } else { 1 })
        }
    }
}

fn load_config(
    path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    dt: Option<f64>,
) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Config(vec![format!(
            "cannot read config file {}: {e}",
            path.display()
        )])
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(out) = out {
        cfg.out_dir = out.to_string_lossy().into_owned();
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(dt) = dt {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(vec![format!(
                "--dt must be positive and finite, got {dt}"
            )]));
        }
        cfg.dt = dt;
    }
    Ok(cfg)
}

fn print_run_report(result: &ExperimentResult) {
    let o = &result.outcome;
    if let Some(info) = &o.aborted {
        println!("run ABORTED at t = {:.3} s: {}", info.t, info.detail);
    } else if let Some(t) = o.converged_at {
        println!(
            "converged at t = {t:.3} s after {} zoom-in contraction(s)",
            o.zoom_in_intervals
        );
    } else {
        println!(
            "horizon reached after {} zoom-in contraction(s)",
            o.zoom_in_intervals
        );
    }
    println!(
        "final ‖x_e‖ = {:.3e}, ‖v_e‖ = {:.3e}, μ = {:.3e}",
        o.final_norm_x_e, o.final_norm_v_e, o.final_mu
    );
    if o.checks.all() {
        println!("all run invariants held");
    } else {
        println!("FAILED invariants: {}", o.checks.failures().join(", "));
    }
    println!("wrote {}", result.out_dir.display());
}
