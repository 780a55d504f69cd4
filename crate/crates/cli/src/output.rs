//! Artifact staging: everything a command produces is held in memory until the
//! command has succeeded, then written through temporary files and renamed
//! into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn json(name: &str, value: &Value) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("JSON values always serialize");
        bytes.push(b'\n');
        Self { name: name.into(), bytes }
    }
}

/// Result of a command: the JSON summary printed on stdout and the files
/// written to the output directory.
pub struct Output {
    pub summary: Value,
    pub artifacts: Vec<Artifact>,
    /// Failures that still produced a complete report.
    pub partial_failures: Vec<String>,
}

impl Output {
    pub fn new(summary: Value) -> Self {
        Self { summary, artifacts: Vec::new(), partial_failures: Vec::new() }
    }

    pub fn with(mut self, artifact: Artifact) -> Self {
        self.artifacts.push(artifact);
        self
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| e.error)?;
    Ok(target)
}

pub struct RunInfo<'a> {
    pub command: &'a str,
    pub config_sha256: Option<String>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

/// Writes the artifacts and then `manifest.json`, which lists them with their
/// hashes.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact], run: &RunInfo) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(artifacts.len() + 1);
    let mut files = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        written.push(write_atomic(dir, &a.name, &a.bytes)?);
        files.push(json!({ "name": a.name, "sha256": sha256_hex(&a.bytes), "bytes": a.bytes.len() }));
    }
    let manifest = json!({
        "tool": "kerrkit",
        "version": env!("CARGO_PKG_VERSION"),
        "command": run.command,
        "config_sha256": run.config_sha256,
        "seed": run.seed,
        "jobs": run.jobs,
        "files": files,
    });
    let m = Artifact::json("manifest.json", &manifest);
    written.push(write_atomic(dir, &m.name, &m.bytes)?);
    Ok(written)
}
