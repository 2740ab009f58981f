//! Config-driven runner for the counting, subspace, Diophantine, spectral and
//! lattice experiments, plus the acceptance suite behind `oppenheim verify`.

pub mod config;
pub mod experiments;
pub mod output;
pub mod suite;

use std::path::Path;

use thiserror::Error;

use config::{Format, Overrides, RawConfig, ResolvedConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("cap exceeded: {0}")]
    Cap(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("drift: {0}")]
    Drift(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Io(_) | CliError::Drift(_) => 1,
        }
    }
}

impl From<oppenheim_core::Error> for CliError {
    fn from(e: oppenheim_core::Error) -> Self {
        use oppenheim_core::Error as E;
        match e {
            E::CapExceeded(_) | E::Overflow(_) => CliError::Cap(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

/// Resolves, runs and renders one experiment without touching the disk.
pub fn render_run(config: &ResolvedConfig) -> Result<Vec<u8>, CliError> {
    let artifact = experiments::run(config)?;
    output::render(config, &artifact, config.output.format)
}

/// Full `run` subcommand: resolve, compute, write atomically.
pub fn run_to_file(raw: RawConfig, flags: &Overrides) -> Result<ResolvedConfig, CliError> {
    let config = config::resolve(raw, flags)?;
    let bytes = render_run(&config)?;
    output::write_atomic(&config.output.path, &bytes)?;
    Ok(config)
}

/// Resolved config of an experiment with every parameter at its default.
pub fn default_config(e: config::Experiment, dir: &Path, format: Format) -> Result<ResolvedConfig, CliError> {
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let flags = Overrides {
        experiment: Some(e),
        output: Some(dir.join(format!("{e}.{ext}"))),
        format: Some(format),
        ..Default::default()
    };
    config::resolve(RawConfig::default(), &flags)
}
