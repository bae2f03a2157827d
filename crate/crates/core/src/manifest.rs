//! Provenance record written next to command outputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{file_digest, read_text, write_atomic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub seed: Option<u64>,
    /// Input path to SHA-256 digest.
    pub inputs: BTreeMap<String, String>,
    /// Output path to SHA-256 digest; the manifest itself is not listed.
    pub artifacts: BTreeMap<String, String>,
    pub notes: BTreeMap<String, serde_json::Value>,
    pub wall_time_seconds: f64,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        RunManifest {
            command: command.into(),
            config_path: None,
            seed: None,
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            notes: BTreeMap::new(),
            wall_time_seconds: 0.0,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }

    pub fn add_artifact(&mut self, path: &Path) -> Result<()> {
        self.artifacts.insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.notes.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    /// Recomputes every listed digest and reports the first mismatch.
    pub fn verify(&self) -> Result<()> {
        for (path, digest) in self.inputs.iter().chain(&self.artifacts) {
            let now = file_digest(Path::new(path))?;
            if &now != digest {
                return Err(Error::Contract(format!("digest of {path} changed")));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        write_atomic(path, s.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&read_text(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_detects_changes() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        std::fs::write(&a, "x").unwrap();
        let mut m = RunManifest::new("test");
        m.add_artifact(&a).unwrap();
        m.verify().unwrap();
        let mpath = dir.path().join("m.json");
        m.save(&mpath).unwrap();
        assert_eq!(RunManifest::load(&mpath).unwrap(), m);
        std::fs::write(&a, "y").unwrap();
        assert!(m.verify().is_err());
    }
}
