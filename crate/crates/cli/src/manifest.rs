//! Run manifests: what was run, with which configuration, and fingerprints
//! of everything it wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
/// Copy of standard input kept so piped runs can be replayed.
pub const STDIN_COPY: &str = "stdin.txt";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub inputs: Vec<String>,
    /// Saved standard input, when the matrix came from a pipe.
    pub stdin_copy: Option<String>,
    pub out_dir: String,
    /// Output file name → SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
    pub exit_code: i32,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes output files into an optional directory and remembers their
/// fingerprints. Without a directory, writes are no-ops.
#[derive(Debug, Default)]
pub struct Sink {
    dir: Option<PathBuf>,
    pub outputs: BTreeMap<String, String>,
}

impl Sink {
    pub fn new(dir: Option<&PathBuf>) -> Result<Self, CliError> {
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(|e| CliError::io(d, e))?;
        }
        Ok(Sink {
            dir: dir.cloned(),
            outputs: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(name);
        fs::write(&path, contents.as_ref()).map_err(|e| CliError::io(&path, e))?;
        self.outputs.insert(name.to_string(), sha256_hex(contents.as_ref()));
        Ok(())
    }

    /// Records a file some library routine wrote into the directory.
    pub fn record(&mut self, name: &str) -> Result<(), CliError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        self.outputs.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }
}
