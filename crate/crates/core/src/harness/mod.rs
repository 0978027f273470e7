//! Configuration, run orchestration, metrics, and validation oracles.

pub mod config;
pub mod metrics;
pub mod oracle;
pub mod run;
pub mod summary;

pub use config::{ConfigError, ScenarioCfg};
pub use oracle::{timestep_oracle, OracleResult, OracleTrace};
pub use run::{load_config, run_scenario, run_sweep, run_to_dir, HarnessError, RunResult};
pub use summary::{summarize, summarize_rows, Summary};
