//! Per-run provenance: resolved config, seed and content hashes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use trajloc::config::ExperimentConfig;

use crate::error::{CliResult, FileContext};

pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Git-style object hash: SHA-256 over `"blob <len>\0"` followed by the bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

pub fn file_hash(path: &Path) -> CliResult<String> {
    Ok(content_hash(&fs::read(path).at(path)?))
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    /// Input file name to content hash.
    pub inputs: BTreeMap<String, String>,
    /// Output path (relative to the run directory) to content hash.
    pub outputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// Collects inputs and extras while a command runs, then seals the run
/// directory.
pub struct RunRecord {
    command: String,
    inputs: BTreeMap<String, String>,
    extra: BTreeMap<String, serde_json::Value>,
}

impl RunRecord {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            extra: BTreeMap::new(),
        }
    }

    /// Records an input by a stable name (its path relative to `base` when
    /// possible), so reruns from other working directories hash the same.
    pub fn input(&mut self, base: &Path, path: &Path) -> CliResult<()> {
        let name = path
            .strip_prefix(base)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/");
        self.inputs.insert(name, file_hash(path)?);
        Ok(())
    }

    pub fn extra(&mut self, key: &str, value: impl Serialize) {
        self.extra.insert(
            key.to_string(),
            serde_json::to_value(value).expect("manifest extras serialize"),
        );
    }

    /// Writes the resolved config and a manifest hashing every file in `dir`.
    pub fn finish(self, dir: &Path, config: &ExperimentConfig) -> CliResult<Manifest> {
        let text = config.to_toml_string()?;
        let cfg_path = dir.join(CONFIG_FILE);
        fs::write(&cfg_path, &text).at(&cfg_path)?;
        let mut outputs = BTreeMap::new();
        collect(dir, dir, &mut outputs)?;
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config_hash: content_hash(text.as_bytes()),
            inputs: self.inputs,
            outputs,
            extra: self.extra,
        };
        let path = dir.join(MANIFEST_FILE);
        let mut json = serde_json::to_string_pretty(&manifest).map_err(trajloc::Error::from)?;
        json.push('\n');
        fs::write(&path, json).at(&path)?;
        Ok(manifest)
    }
}

fn collect(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> CliResult<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .at(dir)?
        .collect::<std::io::Result<Vec<_>>>()
        .at(dir)?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            collect(root, &p, out)?;
        } else if p.file_name().is_some_and(|n| n != MANIFEST_FILE) {
            let rel = p.strip_prefix(root).unwrap_or(&p).to_string_lossy().replace('\\', "/");
            out.insert(rel, file_hash(&p)?);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn git_blob_framing() {
        // sha256 of "blob 0\0"
        assert_eq!(
            content_hash(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
        assert_ne!(content_hash(b"a"), content_hash(b"b"));
    }
}
