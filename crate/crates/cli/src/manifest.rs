//! Run manifest: what was run, with which resolved configuration and
//! seeds, and which files came out.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// One derived random stream pair (spin noise, shot noise).
#[derive(Debug, Clone, Serialize)]
pub struct StreamSeeds {
    pub label: String,
    pub spin: u64,
    pub shot: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedInfo {
    /// Base seed the streams are derived from.
    pub base: u64,
    /// Derived streams actually consumed by the run; empty for
    /// covariance-only commands.
    pub streams: Vec<StreamSeeds>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    /// SHA-256 of the canonical resolved-config JSON.
    pub config_hash: String,
    pub seeds: SeedInfo,
    /// Every file the run wrote, except this manifest.
    pub files: Vec<String>,
    pub timing_ms: u64,
    pub notes: Vec<String>,
    pub resolved_config: RunConfig,
}

/// SHA-256 hex digest of the resolved configuration's canonical JSON.
pub fn config_hash(cfg: &RunConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        write!(hex, "{byte:02x}").expect("string write");
    }
    hex
}

impl RunManifest {
    pub fn new(
        command: &str,
        cfg: &RunConfig,
        seeds: SeedInfo,
        files: Vec<String>,
        timing_ms: u64,
    ) -> Self {
        let mut notes = vec![
            "measurement.g_coupling, measurement.eta and measurement.photon_flux are \
             synthetic defaults; the corresponding instrument values are unpublished"
                .to_owned(),
        ];
        if let Some(note) = &cfg.note {
            notes.push(note.clone());
        }
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: command.to_owned(),
            config_hash: config_hash(cfg),
            seeds,
            files,
            timing_ms,
            notes,
            resolved_config: cfg.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    #[test]
    fn hash_is_reproducible_and_config_sensitive() {
        let a = parse_config_str(r#"{"physical": {"n_rb": 1e14}}"#).unwrap();
        let b = parse_config_str(r#"{"physical": {"n_rb": 1e14}}"#).unwrap();
        let c = parse_config_str(r#"{"physical": {"n_rb": 2e14}}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_ne!(config_hash(&a), config_hash(&c));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
