//! Run orchestration: single runs, parameter sweeps, and output files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::harness::config::{apply_override, ConfigError, ScenarioCfg};
use crate::harness::metrics::{
    activities_csv, cpu_csv, jobs_csv, links_csv, transfers_csv, Metrics,
};
use crate::harness::summary::{render, summarize, Summary};
use crate::scenarios::world::{RunError, World};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("runtime error: {0}")]
    Run(#[from] RunError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents)
        .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

/// In-memory results of one run.
pub struct RunResult {
    pub cfg: ScenarioCfg,
    pub metrics: Metrics,
    pub summary: Summary,
    pub report: crate::engine::SimulationReport,
    pub audit_violations: Vec<String>,
    pub stats: crate::scenarios::world::RunStats,
}

/// Load a config file, apply `--set` overrides, and validate.
pub fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<ScenarioCfg, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    load_config_str(&text, &path.display().to_string(), overrides)
}

pub fn load_config_str(
    text: &str,
    origin: &str,
    overrides: &[(String, String)],
) -> Result<ScenarioCfg, HarnessError> {
    let mut value: toml::Value = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError { path: origin.to_string(), message: e.to_string() })?;
    for (path, raw) in overrides {
        apply_override(&mut value, path, raw)?;
    }
    Ok(ScenarioCfg::from_value(value, origin)?)
}

/// Execute one simulation run entirely in memory.
pub fn run_scenario(cfg: ScenarioCfg) -> Result<RunResult, HarnessError> {
    let mut world = World::build(cfg.clone())?;
    let outcome = world.run()?;
    let metrics = std::mem::take(&mut world.core.metrics);
    let summary = summarize(&metrics);
    Ok(RunResult {
        cfg,
        metrics,
        summary,
        report: outcome.report,
        audit_violations: outcome.audit_violations,
        stats: outcome.stats,
    })
}

/// Run and write the output set into `out_dir`.
pub fn run_to_dir(cfg: ScenarioCfg, out_dir: &Path) -> Result<RunResult, HarnessError> {
    let result = run_scenario(cfg)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|source| HarnessError::Io { path: out_dir.to_path_buf(), source })?;
    write(&out_dir.join("resolved_config.toml"), &result.cfg.to_resolved_toml())?;
    write(&out_dir.join("transfers.csv"), &transfers_csv(&result.metrics.transfers))?;
    write(&out_dir.join("links.csv"), &links_csv(&result.metrics.links))?;
    write(&out_dir.join("cpu.csv"), &cpu_csv(&result.metrics.cpus))?;
    write(&out_dir.join("jobs.csv"), &jobs_csv(&result.metrics.jobs))?;
    write(&out_dir.join("activities.csv"), &activities_csv(&result.metrics.activities))?;
    let diagnostics = diagnostics_for(&result);
    write(&out_dir.join("summary.txt"), &render(&result.summary, &diagnostics))?;
    Ok(result)
}

fn diagnostics_for(result: &RunResult) -> Vec<(String, String)> {
    let mut diag = vec![
        ("events_processed".to_string(), result.report.events_processed.to_string()),
        ("stale_epoch_drops".to_string(), result.report.stale_epoch_drops.to_string()),
        ("finished_target_drops".to_string(), result.report.finished_target_drops.to_string()),
        ("clamp_events".to_string(), result.report.clamp_events.to_string()),
        ("job_failures".to_string(), result.metrics.job_failures.to_string()),
        ("audit_violations".to_string(), result.audit_violations.len().to_string()),
    ];
    for violation in &result.audit_violations {
        diag.push(("audit".to_string(), violation.clone()));
    }
    diag
}

/// Expand `--sweep` specs into the cartesian product of override sets.
pub fn expand_sweeps(
    sweeps: &[(String, Vec<String>)],
) -> Vec<(String, Vec<(String, String)>)> {
    let mut points: Vec<(String, Vec<(String, String)>)> = vec![(String::new(), Vec::new())];
    for (path, values) in sweeps {
        let mut next = Vec::new();
        for (label, overrides) in &points {
            for value in values {
                let mut overrides = overrides.clone();
                overrides.push((path.clone(), value.clone()));
                let key = path.rsplit('.').next().unwrap_or(path);
                let clean: String = value
                    .chars()
                    .map(|c| if c.is_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
                    .collect();
                let label = if label.is_empty() {
                    format!("{key}={clean}")
                } else {
                    format!("{label},{key}={clean}")
                };
                next.push((label, overrides));
            }
        }
        points = next;
    }
    points
}

/// Run a sweep: one output subdirectory per point, points in parallel.
pub fn run_sweep(
    base_text: &str,
    origin: &str,
    fixed_overrides: &[(String, String)],
    sweeps: &[(String, Vec<String>)],
    out_dir: &Path,
) -> Result<BTreeMap<String, RunResult>, HarnessError> {
    let points = expand_sweeps(sweeps);
    let mut handles = Vec::new();
    for (label, sweep_overrides) in points {
        let mut overrides = fixed_overrides.to_vec();
        overrides.extend(sweep_overrides);
        let cfg = load_config_str(base_text, origin, &overrides)?;
        let dir =
            if label.is_empty() { out_dir.to_path_buf() } else { out_dir.join(&label) };
        handles.push((
            label,
            std::thread::spawn(move || run_to_dir(cfg, &dir)),
        ));
    }
    let mut results = BTreeMap::new();
    for (label, handle) in handles {
        let result = handle.join().expect("sweep worker panicked")?;
        results.insert(label, result);
    }
    Ok(results)
}
