use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

/// Record of one stage run. Holds no timestamps or absolute paths, so a
/// rerun on the same inputs and config writes the same bytes.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub stage: &'static str,
    pub version: &'static str,
    pub inputs: Vec<FileDigest>,
    pub config: Map<String, Value>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest.iter() {
        write!(hex, "{b:02x}").expect("write to string");
    }
    Ok(hex)
}

fn digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                file: p
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

impl Manifest {
    pub fn new(
        stage: &'static str,
        inputs: &[PathBuf],
        config: Map<String, Value>,
        outputs: &[PathBuf],
    ) -> Result<Self> {
        Ok(Manifest {
            stage,
            version: env!("CARGO_PKG_VERSION"),
            inputs: digests(inputs)?,
            config,
            outputs: digests(outputs)?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// `out.csv` → `out.csv.manifest.json`
pub fn manifest_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
