use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

pub fn digest(path: &Path) -> CliResult<FileDigest> {
    let mut f = std::fs::File::open(path).map_err(|e| catrank::Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| catrank::Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok(FileDigest {
        path: path.to_owned(),
        bytes,
        sha256: hex::encode(hasher.finalize()),
    })
}

/// Provenance record written next to every stage's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub workers: usize,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub details: serde_json::Value,
    pub started_unix_ms: u128,
    pub wall_clock_seconds: f64,
}
