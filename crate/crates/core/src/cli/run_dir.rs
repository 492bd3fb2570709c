//! Run-directory layout and the manifest that indexes it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{DcbEnv, DcbScenario, Environment, OracleMdp};
use crate::error::{Error, Result};
use crate::mimic::MimicEnsemble;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.toml";
pub const ENVIRONMENT: &str = "environment.json";
pub const SCENARIO: &str = "scenario.toml";
pub const MODELS: &str = "models";
pub const SNAPSHOTS: &str = "snapshots";
pub const METRICS: &str = "metrics";
pub const REPORTS: &str = "reports";
pub const QNET_FILE: &str = "models/qnet.bin";
pub const MIMIC_FILE: &str = "models/mimic.bin";
pub const METRICS_LOG: &str = "metrics/metrics.tsv";

/// Tabular oracle size used by `--scenario oracle`.
pub const ORACLE_STATES: usize = 16;
pub const ORACLE_ACTIONS: usize = 3;

/// How to rebuild the training environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvRecord {
    Oracle { states: usize, actions: usize, seed: u64 },
    /// The scenario is copied into the run directory.
    Dcb { scenario: String },
}

impl EnvRecord {
    pub fn open(&self, dir: &Path) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvRecord::Oracle {
                states,
                actions,
                seed,
            } => Box::new(OracleMdp::random(*states, *actions, *seed)?),
            EnvRecord::Dcb { scenario } => {
                Box::new(DcbEnv::new(DcbScenario::load(&dir.join(scenario))?)?)
            }
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(ENVIRONMENT);
        let text = fs::read_to_string(&path).map_err(|e| missing(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn missing(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidArgument(format!("cannot read {}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSource {
    /// File path given on the command line, or `oracle`.
    pub source: String,
    /// Hash of the source file; absent for the generated oracle.
    pub sha256: Option<String>,
}

/// Index of every artifact in a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub scenario: ScenarioSource,
    pub config_sha256: String,
    pub layout: Vec<String>,
    /// Wall-clock seconds per command.
    pub timings: BTreeMap<String, f64>,
    /// False until training wrote its last artifact.
    pub complete: bool,
    pub artifacts: Vec<Artifact>,
}

impl RunManifest {
    pub fn new(seed: u64, scenario: ScenarioSource, config_sha256: String) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            scenario,
            config_sha256,
            layout: [MODELS, SNAPSHOTS, METRICS, REPORTS]
                .iter()
                .map(|d| format!("{d}/"))
                .collect(),
            timings: BTreeMap::new(),
            complete: false,
            artifacts: Vec::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| missing(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Rehashes every file under `dir` and writes the manifest.
    pub fn store(&mut self, dir: &Path) -> Result<()> {
        let mut files = Vec::new();
        walk(dir, dir, &mut files)?;
        files.retain(|p| p != MANIFEST);
        files.sort();
        self.artifacts = files
            .into_iter()
            .map(|path| {
                let bytes = fs::read(dir.join(&path))?;
                Ok(Artifact {
                    sha256: sha256_hex(&bytes),
                    bytes: bytes.len() as u64,
                    path,
                })
            })
            .collect::<Result<_>>()?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(dir.join(MANIFEST), text)?;
        Ok(())
    }

    /// Hash recorded for `path`, if listed.
    pub fn hash_of(&self, path: &str) -> Option<&str> {
        self.artifacts
            .iter()
            .find(|a| a.path == path)
            .map(|a| a.sha256.as_str())
    }
}

/// Relative paths with `/` separators.
fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            walk(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("walked below root");
            let parts: Vec<_> = rel.iter().map(|c| c.to_string_lossy()).collect();
            out.push(parts.join("/"));
        }
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn snapshot_name(step: u64) -> String {
    format!("{SNAPSHOTS}/mimic_{step:010}.bin")
}

/// Snapshot files in stamp order.
pub fn snapshot_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let snap_dir = dir.join(SNAPSHOTS);
    if !snap_dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(snap_dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "bin"));
    paths.sort();
    Ok(paths)
}

pub fn load_snapshots(dir: &Path) -> Result<Vec<MimicEnsemble>> {
    let mut snaps = snapshot_paths(dir)?
        .iter()
        .map(|p| MimicEnsemble::load(p))
        .collect::<Result<Vec<_>>>()?;
    snaps.sort_by_key(|m| m.fitted_at());
    Ok(snaps)
}
