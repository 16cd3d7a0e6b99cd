//! Atomic output files and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::commands::CliError;

/// Writes `bytes` to `dir/name` through a temp file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let io = |source| CliError::Io {
        path: path.clone(),
        source,
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(io)?;
    }
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(&path).map_err(|e| io(e.error))?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_owned(),
        source,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub setup_seconds: f64,
    pub iterate_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_seconds: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    pub final_inclusion: f64,
    pub last_relative_change: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub command: String,
    pub config: PathBuf,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    pub converged: bool,
    pub iterations: usize,
    pub residuals: Residuals,
    pub timings: Timings,
}

impl RunManifest {
    pub fn file_names(paths: &[PathBuf]) -> Vec<PathBuf> {
        paths
            .iter()
            .map(|p| p.file_name().map(PathBuf::from).unwrap_or_else(|| p.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.txt", b"one").unwrap();
        let p = write_atomic(dir.path(), "a.txt", b"two").unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
