//! Run directories: artifacts, their hashes, and the manifest.
//!
//! Every file a command emits goes through [`RunDir::write`], which records
//! its SHA-256. The manifest is written last; a directory without one is an
//! incomplete run.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scenario::{code_version, ScenarioConfig, SeedPlanSummary};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: ScenarioConfig,
    pub seed_plan: SeedPlanSummary,
    pub code_version: String,
    /// Seconds since the Unix epoch.
    pub started: u64,
    pub finished: u64,
    pub artifacts: Vec<Artifact>,
}

impl RunManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn artifact(&self, path: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.path == path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub struct RunDir {
    root: PathBuf,
    manifest: RunManifest,
    created: bool,
}

impl RunDir {
    pub fn create(root: &Path, command: &str, config: &ScenarioConfig) -> Result<Self> {
        let created = !root.exists();
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        // a stale manifest would vouch for files this run is about to replace
        let stale = root.join(MANIFEST);
        if stale.exists() {
            std::fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
        }
        Ok(Self {
            root: root.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                config: config.clone(),
                seed_plan: SeedPlanSummary::from(&config.rng_plan()),
                code_version: code_version(),
                started: now(),
                finished: 0,
                artifacts: Vec::new(),
            },
            created,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.record(name, bytes);
        Ok(())
    }

    /// Registers a file written by other means (binary dumps).
    pub fn register(&mut self, name: &str) -> Result<()> {
        let path = self.root.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.record(name, &bytes);
        Ok(())
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.manifest.artifacts.retain(|a| a.path != name);
        self.manifest.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }

    /// Removes the directory if this run created it and wrote nothing.
    pub fn abandon(self) {
        if self.created && self.manifest.artifacts.is_empty() {
            let _ = std::fs::remove_dir_all(&self.root);
        }
    }

    pub fn finish(mut self) -> Result<RunManifest> {
        self.manifest.finished = now();
        let path = self.root.join(MANIFEST);
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(self.manifest)
    }
}

/// Reads the manifest and checks every listed artifact against its hash.
pub fn verify_run(root: &Path) -> Result<RunManifest> {
    let path = root.join(MANIFEST);
    if !path.exists() {
        return Err(Error::Incomplete(format!("{} has no {MANIFEST}", root.display())));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest = RunManifest::from_json(&text)?;
    let missing: Vec<&str> = manifest
        .artifacts
        .iter()
        .filter(|a| !root.join(&a.path).exists())
        .map(|a| a.path.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Incomplete(format!(
            "{} is missing {}",
            root.display(),
            missing.join(", ")
        )));
    }
    for a in &manifest.artifacts {
        let p = root.join(&a.path);
        let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
        if sha256_hex(&bytes) != a.sha256 {
            return Err(Error::Integrity(format!("{} (hash mismatch)", p.display())));
        }
    }
    Ok(manifest)
}

/// CSV to whitespace-delimited columns with a commented header.
pub fn csv_to_dat(csv: &str) -> String {
    let mut out = String::new();
    for (i, line) in csv.lines().enumerate() {
        if i == 0 {
            out.push_str("# ");
        }
        out.push_str(&line.replace(',', " "));
        out.push('\n');
    }
    out
}
