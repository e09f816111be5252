//! Run orchestration: executes an experiment, writes artifacts and the
//! manifest atomically, and reports the pass/fail outcome.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{catalog_entry, ConfigError, ExperimentConfig};

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Assertion {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

/// What an experiment produces: a JSON summary body, named data artifacts,
/// and the assertion list.
pub struct Outcome {
    pub summary: serde_json::Value,
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u64,
    pub experiment: String,
    pub claim: String,
    pub config: ExperimentConfig,
    pub wall_clock_secs: f64,
    pub artifacts: Vec<ArtifactRecord>,
    pub assertions: Vec<Assertion>,
    pub pass: bool,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Execute the experiment named by the config and persist everything under
/// `out_dir`. Returns the manifest (already written to disk).
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest, Box<dyn std::error::Error>> {
    crate::config::validate(config)?;
    let entry = catalog_entry(&config.experiment).expect("validated");
    std::fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let mut outcome = crate::experiments::dispatch(config)?;
    let wall = started.elapsed().as_secs_f64();

    // summary.json carries the claim identifier and the assertion list
    let summary = serde_json::json!({
        "experiment": entry.name,
        "claim": entry.claim,
        "seed": config.seed,
        "report": outcome.summary,
        "assertions": outcome.assertions,
    });
    outcome
        .artifacts
        .push(("summary.json".into(), serde_json::to_vec_pretty(&summary)?));

    let mut records = Vec::new();
    for (name, bytes) in &outcome.artifacts {
        let path: PathBuf = out_dir.join(name);
        write_atomic(&path, bytes)?;
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        records.push(ArtifactRecord {
            name: name.clone(),
            sha256: hex::encode(hasher.finalize()),
            bytes: bytes.len(),
        });
    }

    let pass = outcome.assertions.iter().all(|a| a.pass);
    let manifest = RunManifest {
        schema_version: config.schema_version,
        experiment: config.experiment.clone(),
        claim: entry.claim.to_string(),
        config: config.clone(),
        wall_clock_secs: wall,
        artifacts: records,
        assertions: outcome.assertions,
        pass,
    };
    write_atomic(
        &out_dir.join("manifest.json"),
        &serde_json::to_vec_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// Deterministic CSV float formatting.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.12e}")
}

/// Build a CSV artifact from a header and rows of formatted cells.
pub fn csv_artifact(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn schema_err(msg: &str) -> ConfigError {
    ConfigError::Schema(msg.to_string())
}
