//! Run manifests and run-directory allocation.
//!
//! Every run owns a directory holding its manifest, metrics, checkpoints,
//! and figures. A manifest is written exactly once: when the requested
//! directory already contains one, the run is placed in the next free
//! `-rN` sibling instead, so no rerun ever clobbers an earlier record.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::LabConfig;
use crate::{LabError, LabResult};

pub const MANIFEST_SCHEMA: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

/// Digest of the workspace sources this binary was built from, embedded at
/// compile time.
pub fn source_digest() -> &'static str {
    env!("DGPO_SOURCE_DIGEST")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    /// Subcommand that produced the run.
    pub command: String,
    /// Seed the run actually used (after any command-line override).
    pub seed: u64,
    /// Source digest of the producing binary.
    pub source_digest: String,
    /// Fully resolved configuration as TOML text; feeding this back in
    /// reproduces the identical run.
    pub config_toml: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: &LabConfig) -> LabResult<Self> {
        let config_toml = toml::to_string_pretty(&config.resolved())
            .map_err(|e| LabError::runtime(format!("serialize resolved config: {e}")))?;
        Ok(RunManifest {
            schema: MANIFEST_SCHEMA,
            command: command.to_string(),
            seed,
            source_digest: source_digest().to_string(),
            config_toml,
        })
    }
}

/// Returns `base` if it holds no manifest yet, otherwise the first free
/// `base-r2`, `base-r3`, ... sibling. The directory is created.
pub fn allocate_run_dir(base: &Path) -> LabResult<PathBuf> {
    let candidate = |n: usize| -> PathBuf {
        if n == 1 {
            base.to_path_buf()
        } else {
            let name = base.file_name().map_or_else(String::new, |f| f.to_string_lossy().into());
            base.with_file_name(format!("{name}-r{n}"))
        }
    };
    for n in 1..10_000 {
        let dir = candidate(n);
        fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;
        if !dir.join(MANIFEST_NAME).exists() {
            return Ok(dir);
        }
    }
    Err(LabError::runtime(format!("no free run directory under {}", base.display())))
}

/// Writes the manifest into `dir`, refusing to replace an existing one.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> LabResult<()> {
    let path = dir.join(MANIFEST_NAME);
    let mut file = fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(&path)
        .map_err(|e| LabError::io(&path, e))?;
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| LabError::runtime(format!("serialize manifest: {e}")))?;
    file.write_all(text.as_bytes()).map_err(|e| LabError::io(&path, e))?;
    file.write_all(b"\n").map_err(|e| LabError::io(&path, e))?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> LabResult<RunManifest> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| LabError::io(&path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| LabError::runtime(format!("parse {}: {e}", path.display())))
}
