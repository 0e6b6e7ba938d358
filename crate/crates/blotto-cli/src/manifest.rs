//! Reproducibility manifest: every run writes `run_manifest.json` next to
//! its artifacts, recording the command, the effective configuration and
//! its digest, a digest per input file, and the tool versions. Reruns on
//! identical inputs produce manifests that differ only in `created_utc`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: &RunConfig,
    inputs: &[PathBuf],
) -> Result<()> {
    let config_json = serde_json::to_value(config).context("manifest: cannot encode config")?;
    let config_sha256 = sha256_hex(config_json.to_string().as_bytes());

    let mut digests = BTreeMap::new();
    for path in inputs {
        let bytes = std::fs::read(path)
            .with_context(|| format!("input: cannot read {}", path.display()))?;
        digests.insert(path.display().to_string(), sha256_hex(&bytes));
    }

    let manifest = serde_json::json!({
        "command": command,
        "created_utc": chrono::Utc::now().to_rfc3339(),
        "config": config_json,
        "config_sha256": config_sha256,
        "inputs": digests,
        "versions": {
            "blotto-cli": env!("CARGO_PKG_VERSION"),
            "blotto-core": blotto_core::VERSION,
        },
    });
    let path = out_dir.join("run_manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n")
        .with_context(|| format!("output: cannot write {}", path.display()))
}
