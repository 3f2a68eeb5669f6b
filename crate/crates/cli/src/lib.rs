//! Batch front end for the `fedwhit` engine: TOML job configs, task
//! orchestration, deterministic reports and an on-disk Fedosov-state cache.

pub mod config;
pub mod engine;
pub mod error;
pub mod job;
pub mod output;
pub mod run;

use std::path::PathBuf;

pub use config::JobConfig;
pub use error::{CliError, CliResult};
pub use job::{Job, Overrides};
pub use output::{RunReport, Status};

pub fn parse_config(text: &str) -> CliResult<JobConfig> {
    toml::from_str(text).map_err(|e| CliError::Schema(e.to_string().trim_end().to_owned()))
}

/// Parse, resolve and run a config. `only` restricts the run to one task
/// kind; if the config lists none of that kind its default task is run.
pub fn run_config(text: &str, ov: &Overrides, cache_dir: Option<PathBuf>, only: Option<&str>) -> CliResult<RunReport> {
    let mut cfg = parse_config(text)?;
    if let Some(kind) = only {
        cfg.tasks.retain(|t| t.kind() == kind);
        if cfg.tasks.is_empty() {
            let t = config::TaskConfig::default_of(kind)
                .ok_or_else(|| CliError::Schema(format!("the config has no `{kind}` task")))?;
            cfg.tasks.push(t);
        }
    }
    let job = Job::resolve(&cfg, ov)?;
    Ok(run::run_job(&job, cache_dir))
}
