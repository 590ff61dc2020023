//! Config-driven runner for the collapse-core experiments.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration,
//! 3 numerical contract violation.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};
use thiserror::Error;

use config::{Config, ExperimentKind, OutputFormat};

/// Version string from `git describe`, or the crate version outside a
/// checkout.
pub const VERSION: &str = env!("COLLAPSE_LAB_VERSION");

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "COLLAPSE_LAB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl From<collapse_core::Error> for CliError {
    fn from(e: collapse_core::Error) -> Self {
        use collapse_core::Error as E;
        match e {
            E::InvalidParameter { .. }
            | E::Fixture { .. }
            | E::EmptyState
            | E::BasisMismatch
            | E::GridMismatch(_) => Self::Config(e.to_string()),
            E::ZeroNorm | E::Domain(_) | E::Contract(_) => Self::Numerical(e.to_string()),
        }
    }
}

/// Where a run writes its files.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPlan {
    pub data: PathBuf,
    pub format: OutputFormat,
}

impl OutputPlan {
    /// `--out` and `--format` override the `[output]` section; the default
    /// is `<experiment>.<ext>` in the working directory.
    pub fn resolve(config: &Config, out: Option<&Path>, format: Option<OutputFormat>) -> Self {
        let format = format.or(config.output.format).unwrap_or_default();
        let data = match (out, &config.output.path) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(p)) => config.resolve_path(p),
            (None, None) => PathBuf::from(format!("{}.{}", config.experiment.name(), format.extension())),
        };
        Self { data, format }
    }

    pub fn summary(&self) -> PathBuf {
        output::sibling(&self.data, "summary.json")
    }

    pub fn extra(&self, suffix: &str) -> PathBuf {
        output::sibling(&self.data, &format!("{suffix}.{}", self.format.extension()))
    }
}

/// Apply the thread cap from the environment, if set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // A pool may already exist when embedded; that is not an error here.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Load, check the experiment name and run, writing data and summary.
pub fn run(
    kind: ExperimentKind,
    config_path: &Path,
    seed: Option<u64>,
    out: Option<&Path>,
    format: Option<OutputFormat>,
) -> Result<OutputPlan, CliError> {
    let started = Instant::now();
    let config = Config::load(config_path)?;
    if config.experiment != kind {
        return Err(CliError::Config(format!(
            "config describes experiment `{}` but `{}` was requested",
            config.experiment.name(),
            kind.name()
        )));
    }
    let seed = seed.unwrap_or(config.seed);
    let prepared = experiments::prepare(&config)?;
    let outcome = experiments::execute(&prepared, seed)?;
    let plan = OutputPlan::resolve(&config, out, format);

    output::write_table(&outcome.table, &plan.data, plan.format)?;
    let mut files = serde_json::Map::new();
    files.insert("data".into(), json!(plan.data.display().to_string()));
    for (suffix, table) in &outcome.extra {
        let path = plan.extra(suffix);
        output::write_table(table, &path, plan.format)?;
        files.insert(suffix.clone(), json!(path.display().to_string()));
    }
    let summary = json!({
        "experiment": config.experiment.name(),
        "version": VERSION,
        "seed": seed,
        "parameters": config.section.to_json(),
        "derived": Value::Object(prepared.derived.clone()),
        "results": Value::Object(outcome.results),
        "files": Value::Object(files),
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    output::write_json(&summary, &plan.summary())?;
    Ok(plan)
}

/// Parse and check a config without running it; returns a report.
pub fn validate(config_path: &Path) -> Result<String, CliError> {
    let config = Config::load(config_path)?;
    let prepared = experiments::prepare(&config)?;
    let mut lines = vec![
        format!("experiment = {}", config.experiment.name()),
        format!("seed = {}", config.seed),
    ];
    if let Value::Object(params) = config.section.to_json() {
        for (k, v) in params {
            if !v.is_null() {
                lines.push(format!("{k} = {v}"));
            }
        }
    }
    for (k, v) in &prepared.derived {
        let name = if k == "t_cal" { "T_cal" } else { k.as_str() };
        lines.push(format!("{name} = {v}"));
    }
    lines.push("ok".into());
    Ok(lines.join("\n"))
}
