//! Atomic output files and run manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::CliError;

/// Provenance written next to every output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<PathBuf>,
}

/// Hex SHA-256 of raw bytes.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of the compact JSON form of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String, CliError> {
    Ok(digest(&serde_json::to_vec(config)?))
}

/// Writes `contents` through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

pub fn manifest_path(out: &Path) -> PathBuf {
    sibling_path(out, ".manifest.json")
}

/// Path of a secondary output derived from the main one, e.g. `scan.csv.quads.csv`.
pub fn sibling_path(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    out.with_file_name(name)
}

/// Identity of one run, recorded in its manifest.
pub struct Provenance<'a> {
    pub command: &'a str,
    pub config_hash: String,
    pub seed: Option<u64>,
}

/// Emits `contents` to `out` (plus `extras` and a manifest), or to stdout.
/// Extras are only written when an output path is given.
pub fn emit(
    out: Option<&Path>,
    contents: &[u8],
    extras: Vec<(PathBuf, Vec<u8>)>,
    provenance: Provenance<'_>,
) -> Result<(), CliError> {
    let Some(path) = out else {
        std::io::stdout().write_all(contents)?;
        return Ok(());
    };
    write_atomic(path, contents)?;
    let mut outputs = vec![path.to_path_buf()];
    for (p, bytes) in extras {
        write_atomic(&p, &bytes)?;
        outputs.push(p);
    }
    let manifest = RunManifest {
        command: provenance.command.to_string(),
        config_hash: provenance.config_hash,
        seed: provenance.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_atomic(&manifest_path(path), &json)
}
