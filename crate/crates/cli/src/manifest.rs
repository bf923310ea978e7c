//! Artifact manifest with content checksums.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Command that wrote the file.
    pub command: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: RunConfig,
    /// Paths relative to the output directory.
    pub artifacts: BTreeMap<String, Artifact>,
    /// Share of front records that are efficient, once `front` has run.
    pub efficient_fraction: Option<f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

impl RunManifest {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            artifacts: BTreeMap::new(),
            efficient_fraction: None,
        }
    }

    /// Loads the manifest in `dir`, or starts a fresh one.
    pub fn load_or_new(dir: &Path, config: &RunConfig) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::new(config));
        }
        let mut m = Self::load(dir)?;
        m.tool_version = env!("CARGO_PKG_VERSION").to_string();
        m.config = config.clone();
        Ok(m)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn record(&mut self, dir: &Path, name: &str, command: &str) -> Result<()> {
        let sha256 = file_sha256(&dir.join(name))?;
        self.artifacts.insert(
            name.to_string(),
            Artifact {
                command: command.to_string(),
                sha256,
            },
        );
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    /// Names of artifacts that are missing or whose content changed.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.artifacts
            .iter()
            .filter(|(name, a)| file_sha256(&dir.join(name)).map_or(true, |h| h != a.sha256))
            .map(|(name, _)| name.clone())
            .collect()
    }

    pub fn checksum(&self, name: &str) -> Result<&str> {
        match self.artifacts.get(name) {
            Some(a) => Ok(&a.sha256),
            None => bail!("artifact {name} is not in the manifest"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn record_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        let mut m = RunManifest::new(&RunConfig::default());
        m.record(dir.path(), "a.csv", "sample").unwrap();
        m.save(dir.path()).unwrap();
        let back = RunManifest::load(dir.path()).unwrap();
        assert_eq!(back, m);
        assert!(back.verify(dir.path()).is_empty());
        fs::write(dir.path().join("a.csv"), "x\n2\n").unwrap();
        assert_eq!(back.verify(dir.path()), vec!["a.csv".to_string()]);
    }
}
