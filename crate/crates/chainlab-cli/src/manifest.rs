//! Run manifest: what was run, with which configuration and seed, and the
//! content hashes of every emitted artifact.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub seed: u64,
    pub out_dir: String,
    pub threads: usize,
    pub artifacts: Vec<Artifact>,
    pub wall_clock_seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

impl RunManifest {
    pub fn record(&mut self, path: &Path, contents: &[u8]) {
        self.artifacts.push(Artifact {
            path: path.display().to_string(),
            sha256: sha256_hex(contents),
        });
    }
}
