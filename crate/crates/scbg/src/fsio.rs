//! Small filesystem helpers shared by the artifact formats.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seed and configuration hash recorded into every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
}

/// Reads an upstream artifact; absence is reported as a missing artifact
/// produced by `step`.
pub fn read_artifact(path: &Path, what: &'static str, step: &'static str) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingArtifact { what, path: path.to_path_buf(), step }),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Writes `contents`, creating parent directories.
pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Compact JSON plus a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string(value).map_err(|e| Error::Invalid(format!("cannot encode {}: {e}", path.display())))?;
    s.push('\n');
    write(path, s)
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::json(path, text, &e))
}

/// Sidecar recording the provenance of a non-JSON artifact.
pub fn write_sidecar(path: &Path, provenance: &Provenance) -> Result<()> {
    let mut name = path.as_os_str().to_owned();
    name.push(".provenance.json");
    write_json(Path::new(&name), provenance)
}
