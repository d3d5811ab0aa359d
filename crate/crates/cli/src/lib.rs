//! Library surface of the command-line front end, exposed so integration
//! tests can drive runs in-process exactly as the binary does.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod svg;

pub use commands::{run_command, Command};
pub use config::{parse_config, parse_config_str, OutputFormat, RunConfig};
pub use error::CliError;
pub use manifest::RunManifest;

/// Environment variable overriding the output directory (and nothing
/// else).
pub const OUT_DIR_ENV: &str = "SERFSIM_OUT";

/// Command-line overrides folded into the configuration before a run, in
/// precedence order: flag, then environment, then config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub out: Option<String>,
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
}

pub fn apply_overrides(cfg: &mut RunConfig, overrides: &Overrides) {
    if let Some(out) = &overrides.out {
        cfg.output.directory = out.clone();
    } else if let Ok(out) = std::env::var(OUT_DIR_ENV) {
        if !out.is_empty() {
            cfg.output.directory = out;
        }
    }
    if let Some(seed) = overrides.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(format) = overrides.format {
        cfg.output.format = format;
    }
}
