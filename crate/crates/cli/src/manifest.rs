use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use obslab::Result;

use crate::experiments::Outcome;

#[derive(Debug, Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub obslab: &'static str,
    pub cli: &'static str,
}

/// `run.json`: everything needed to tie outputs back to their inputs.
/// Carries no timestamps, so reruns of one config are byte-identical.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub experiment: &'static str,
    pub config_sha256: String,
    pub config: Value,
    pub versions: Versions,
    pub verdict: Option<bool>,
    pub summary: Value,
    pub artifacts: Vec<ArtifactEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes every artifact under `dir` followed by `run.json`.
pub fn write_run(
    dir: &Path,
    experiment: &'static str,
    config_bytes: &[u8],
    config: Value,
    outcome: Outcome,
) -> Result<RunManifest> {
    fs::create_dir_all(dir)?;
    let mut artifacts = Vec::with_capacity(outcome.artifacts.len());
    for a in &outcome.artifacts {
        fs::write(dir.join(&a.name), &a.bytes)?;
        artifacts.push(ArtifactEntry {
            path: a.name.clone(),
            sha256: sha256_hex(&a.bytes),
            bytes: a.bytes.len(),
        });
    }
    let manifest = RunManifest {
        experiment,
        config_sha256: sha256_hex(config_bytes),
        config,
        versions: Versions {
            obslab: obslab::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
        },
        verdict: outcome.verdict,
        summary: outcome.summary,
        artifacts,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    fs::write(dir.join("run.json"), bytes)?;
    Ok(manifest)
}
