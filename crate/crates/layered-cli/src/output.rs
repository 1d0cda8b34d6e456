//! Writing artifacts and the run manifest.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::studies::{Check, StudyOutput};

/// Environment variable naming the output directory.
pub const OUT_DIR_ENV: &str = "LAYERED_OUT_DIR";

/// The output directory: the explicit flag, then the environment, then the
/// config file, then `out`.
pub fn resolve_out_dir(flag: Option<PathBuf>, config: &RunConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

/// Everything needed to reproduce and audit a run.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub scenario: String,
    pub master_seed: u64,
    pub tol_scale: f64,
    pub threads: usize,
    pub config_hash: String,
    pub config: &'a RunConfig,
    pub files: Vec<FileEntry>,
    pub checks: &'a [Check],
    pub passed: bool,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Write every artifact, then `manifest-<command>.json`, and `failures.json`
/// when a check failed. Returns whether every check passed.
pub fn write_run(
    dir: &Path,
    command: &str,
    config: &RunConfig,
    tol_scale: f64,
    outputs: &[StudyOutput],
) -> anyhow::Result<bool> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    let mut checks = Vec::new();
    for out in outputs {
        for a in &out.artifacts {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.contents).with_context(|| format!("writing {}", path.display()))?;
            files.push(FileEntry { name: a.name.clone(), sha256: sha256_hex(a.contents.as_bytes()) });
        }
        checks.extend(out.checks.iter().cloned());
    }
    let passed = checks.iter().all(|c| c.pass);
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        scenario: config.scenario.to_string(),
        master_seed: config.master_seed,
        tol_scale,
        threads: rayon::current_num_threads(),
        config_hash: config.hash(),
        config,
        files,
        checks: &checks,
        passed,
    };
    let path = dir.join(format!("manifest-{command}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    let failures: Vec<&Check> = checks.iter().filter(|c| !c.pass).collect();
    let failures_path = dir.join("failures.json");
    if failures.is_empty() {
        // A stale report from an earlier run would be misleading.
        if failures_path.exists() {
            std::fs::remove_file(&failures_path)?;
        }
    } else {
        std::fs::write(&failures_path, serde_json::to_string_pretty(&failures)? + "\n")?;
    }
    Ok(passed)
}
