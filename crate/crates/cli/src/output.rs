//! Artifact writing and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Canonical CSV float: 17 significant digits.
pub fn f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Hash of the config as it affects results: the worker count and the
/// output directory are left out.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.run.workers = 0;
    c.output = Default::default();
    let json = serde_json::to_string(&c).expect("config serializes");
    sha256_hex(json.as_bytes())
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub workers: usize,
    pub wall_time_s: f64,
    pub tolerances: BTreeMap<String, f64>,
    pub outputs: Vec<OutputFile>,
}

pub struct Outputs {
    dir: PathBuf,
    pub files: Vec<OutputFile>,
    pub tolerances: BTreeMap<String, f64>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), tolerances: BTreeMap::new() })
    }

    pub fn tolerance(&mut self, name: &str, v: f64) {
        self.tolerances.insert(name.into(), v);
    }

    fn write(&mut self, name: &str, body: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(OutputFile { file: name.into(), sha256: sha256_hex(body) });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, body: String) -> Result<(), CliError> {
        self.write(name, body.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut body = serde_json::to_string_pretty(value).expect("serializable output");
        body.push('\n');
        self.write(name, body.as_bytes())
    }

    pub fn finish(mut self, manifest: RunManifest) -> Result<RunManifest, CliError> {
        let m = RunManifest { outputs: std::mem::take(&mut self.files), tolerances: self.tolerances.clone(), ..manifest };
        let mut body = serde_json::to_string_pretty(&m).expect("serializable manifest");
        body.push('\n');
        let path = self.dir.join("run_manifest.json");
        std::fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(m)
    }
}
