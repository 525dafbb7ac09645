use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

/// Run record written next to every command's outputs.
#[derive(Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config: Value,
    pub inputs: Vec<InputFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Checks every input exists and checksums it, before any work starts.
pub fn checksum_inputs(paths: &[&Path]) -> Result<Vec<InputFile>> {
    for path in paths {
        if !path.is_file() {
            bail!("input file not found: {}", path.display());
        }
    }
    paths
        .iter()
        .map(|path| {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(InputFile {
                path: path.to_path_buf(),
                sha256: sha256_hex(&bytes),
            })
        })
        .collect()
}

pub fn write_manifest(out: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)? + "\n";
    let path = out.join("manifest.json");
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}
