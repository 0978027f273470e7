use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gridsim_core::harness::oracle::{timestep_oracle, OracleTrace};
use gridsim_core::harness::run::{load_config, run_sweep, run_to_dir, HarnessError};

/// Flow-level simulator for distributed data-processing grids.
#[derive(Parser)]
#[command(name = "gridsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write CSV outputs.
    Run {
        /// Scenario config file (TOML).
        scenario: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the simulated duration in seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Override the metrics window in seconds.
        #[arg(long)]
        metrics_interval: Option<f64>,
        /// Output directory (default: ./out).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Config overrides as dotted key=value pairs.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Sweep a key over comma-separated values; repeatable, sweeps
        /// combine as a cartesian product with one run per point.
        #[arg(long = "sweep", value_name = "KEY=V1,V2,...")]
        sweep: Vec<String>,
    },
    /// Validate a scenario config and exit.
    Validate {
        scenario: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Integrate a resource/claim trace with a fixed timestep (test utility).
    Oracle {
        /// Trace file (TOML) describing resources, claims, links, transfers.
        trace: PathBuf,
        /// Timestep in seconds.
        #[arg(long)]
        dt: f64,
    },
}

fn split_pair(raw: &str) -> Result<(String, String), String> {
    raw.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got '{raw}'"))
}

fn parse_overrides(set: &[String]) -> Result<Vec<(String, String)>, String> {
    set.iter().map(|s| split_pair(s)).collect()
}

fn parse_sweeps(sweep: &[String]) -> Result<Vec<(String, Vec<String>)>, String> {
    sweep
        .iter()
        .map(|s| {
            let (key, values) = split_pair(s)?;
            let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
            if values.is_empty() || values.iter().any(|v| v.is_empty()) {
                return Err(format!("empty sweep value in '{s}'"));
            }
            Ok((key, values))
        })
        .collect()
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn classify(err: &HarnessError) -> u8 {
    match err {
        HarnessError::Config(_) => EXIT_VALIDATION,
        HarnessError::Run(_) => EXIT_RUNTIME,
        HarnessError::Io { .. } => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

fn execute(cli: Cli) -> Result<(), (u8, String)> {
    match cli.command {
        Command::Run { scenario, seed, duration, metrics_interval, out, set, sweep } => {
            let mut overrides = parse_overrides(&set).map_err(|m| (EXIT_VALIDATION, m))?;
            if let Some(seed) = seed {
                overrides.push(("seed".to_string(), seed.to_string()));
            }
            if let Some(duration) = duration {
                overrides.push(("duration".to_string(), format!("{duration:?}")));
            }
            if let Some(interval) = metrics_interval {
                overrides.push(("metrics_interval".to_string(), format!("{interval:?}")));
            }
            let sweeps = parse_sweeps(&sweep).map_err(|m| (EXIT_VALIDATION, m))?;

            if sweeps.is_empty() {
                let cfg = load_config(&scenario, &overrides)
                    .map_err(|e| (classify(&e), e.to_string()))?;
                let result = run_to_dir(cfg, &out).map_err(|e| (classify(&e), e.to_string()))?;
                println!(
                    "run complete: {} events, {} transfers, {} audit violations -> {}",
                    result.report.events_processed,
                    result.metrics.transfers.len(),
                    result.audit_violations.len(),
                    out.display()
                );
                if !result.audit_violations.is_empty() {
                    return Err((EXIT_RUNTIME, "end-of-run audits reported violations".into()));
                }
            } else {
                let text = std::fs::read_to_string(&scenario)
                    .map_err(|e| (EXIT_VALIDATION, format!("{}: {e}", scenario.display())))?;
                let results =
                    run_sweep(&text, &scenario.display().to_string(), &overrides, &sweeps, &out)
                        .map_err(|e| (classify(&e), e.to_string()))?;
                for (label, result) in &results {
                    println!(
                        "sweep point {label}: {} events, {} transfers -> {}",
                        result.report.events_processed,
                        result.metrics.transfers.len(),
                        out.join(label).display()
                    );
                }
            }
            Ok(())
        }
        Command::Validate { scenario, set } => {
            let overrides = parse_overrides(&set).map_err(|m| (EXIT_VALIDATION, m))?;
            let cfg =
                load_config(&scenario, &overrides).map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
            println!(
                "ok: scenario '{}', duration {} s, seed {}",
                cfg.scenario, cfg.duration, cfg.seed
            );
            Ok(())
        }
        Command::Oracle { trace, dt } => {
            if dt <= 0.0 {
                return Err((EXIT_VALIDATION, "--dt must be positive".into()));
            }
            let text = std::fs::read_to_string(&trace)
                .map_err(|e| (EXIT_VALIDATION, format!("{}: {e}", trace.display())))?;
            let trace = OracleTrace::parse(&text).map_err(|m| (EXIT_VALIDATION, m))?;
            let result = timestep_oracle(&trace, dt);
            println!("kind,index,finish_s");
            for (i, finish) in result.claim_finish.iter().enumerate() {
                match finish {
                    Some(t) => println!("claim,{i},{t:.6}"),
                    None => println!("claim,{i},unfinished"),
                }
            }
            for (i, finish) in result.transfer_finish.iter().enumerate() {
                match finish {
                    Some(t) => println!("transfer,{i},{t:.6}"),
                    None => println!("transfer,{i},unfinished"),
                }
            }
            Ok(())
        }
    }
}
