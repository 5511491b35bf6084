//! Output directory bookkeeping: every artifact is checksummed into `manifest.json`.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a C,
    inputs: &'a [FileDigest],
    outputs: &'a [FileDigest],
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects artifacts written into one directory.
pub struct RunOutput {
    dir: PathBuf,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl RunOutput {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(RunOutput {
            dir: dir.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn record_input(&mut self, label: &str, bytes: &[u8]) {
        self.inputs.push(FileDigest {
            file: label.to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.outputs.push(FileDigest {
            file: name.to_string(),
            sha256: sha256_hex(contents),
        });
        Ok(path)
    }

    /// Writes the manifest last so it lists every artifact.
    pub fn finish<C: Serialize>(self, command: &str, config: &C) -> io::Result<PathBuf> {
        let manifest = Manifest {
            tool: "paf",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
        text.push('\n');
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, text)?;
        Ok(path)
    }
}
