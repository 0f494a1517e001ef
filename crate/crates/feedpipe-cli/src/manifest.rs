//! Run manifest: one entry per executed stage, with content digests of every
//! input and output file so reruns can be verified byte-for-byte.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stage: String,
    pub seed: u64,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub duration_ms: u128,
    pub version: String,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(sha256_bytes(&bytes))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

/// Append one entry to `<out>/manifest.json` (a JSON array).
pub fn append(out_dir: &Path, entry: ManifestEntry) -> anyhow::Result<()> {
    let path = out_dir.join("manifest.json");
    let mut entries: Vec<ManifestEntry> = if path.exists() {
        serde_json::from_str(&std::fs::read_to_string(&path)?)?
    } else {
        Vec::new()
    };
    entries.push(entry);
    std::fs::write(&path, serde_json::to_string_pretty(&entries)?)?;
    Ok(())
}

pub fn digest_files(out_dir: &Path, names: &[&str]) -> std::io::Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for n in names {
        map.insert((*n).to_string(), sha256_file(&out_dir.join(n))?);
    }
    Ok(map)
}
