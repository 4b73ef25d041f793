//! Run manifests: every batch command records its command line, merged
//! config, seed, tool version, and content digests of inputs and outputs.
//! Re-running with the same inputs reproduces the same output digests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunContext;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: String,
    pub config: serde_json::Value,
    pub master_seed: u64,
    pub tool_version: String,
    pub input_digests: BTreeMap<String, String>,
    pub output_digests: BTreeMap<String, String>,
    pub wall_time_ms: u128,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    started: Instant,
    out_dir: PathBuf,
}

impl ManifestBuilder {
    pub fn start(ctx: &RunContext, config_snapshot: serde_json::Value, out_dir: &Path) -> Self {
        ManifestBuilder {
            manifest: RunManifest {
                command_line: ctx.command_line.clone(),
                config: config_snapshot,
                master_seed: ctx.seed,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                input_digests: BTreeMap::new(),
                output_digests: BTreeMap::new(),
                wall_time_ms: 0,
            },
            started: Instant::now(),
            out_dir: out_dir.to_path_buf(),
        }
    }

    pub fn record_input(&mut self, path: &Path) {
        if let Ok(bytes) = std::fs::read(path) {
            self.manifest
                .input_digests
                .insert(path.display().to_string(), hex_digest(&bytes));
        }
    }

    /// Writes a file and records its digest in one step.
    pub fn write_output(&mut self, path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, bytes)?;
        self.manifest
            .output_digests
            .insert(path.display().to_string(), hex_digest(bytes));
        Ok(())
    }

    /// Finalizes wall time and writes `run_manifest.json` in the output dir.
    pub fn finish(mut self) -> anyhow::Result<()> {
        self.manifest.wall_time_ms = self.started.elapsed().as_millis();
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::create_dir_all(&self.out_dir)?;
        std::fs::write(self.out_dir.join("run_manifest.json"), text)?;
        Ok(())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
