//! Run manifests written next to every command's outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub jobs: usize,
    pub config: RunConfig,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
    /// Command-specific values such as losses, counts and hashes.
    pub details: serde_json::Value,
    pub wall_time_seconds: f64,
}

pub struct Recorder {
    command: String,
    config: RunConfig,
    seed: u64,
    start: Instant,
    inputs: Vec<InputFile>,
    outputs: Vec<String>,
    details: serde_json::Map<String, serde_json::Value>,
    dir: PathBuf,
}

impl Recorder {
    pub fn new(command: &str, config: &RunConfig, seed: u64, dir: &Path) -> Self {
        Recorder {
            command: command.into(),
            config: config.clone(),
            seed,
            start: Instant::now(),
            inputs: vec![],
            outputs: vec![],
            details: Default::default(),
            dir: dir.to_path_buf(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(InputFile {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    /// Path of an output file, recorded in the manifest.
    pub fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details
            .insert(key.into(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }

    pub fn finish(self) -> Result<()> {
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").into(),
            seed: self.seed,
            jobs: rayon::current_num_threads(),
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
            details: serde_json::Value::Object(self.details),
            wall_time_seconds: self.start.elapsed().as_secs_f64(),
        };
        let path = self.dir.join(format!("{}.manifest.json", manifest.command));
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
