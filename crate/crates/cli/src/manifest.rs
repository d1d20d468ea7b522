//! Run manifests: everything needed to reproduce a command's outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<String>,
    pub seed: u64,
    pub workers: usize,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

pub struct ManifestBuilder {
    command: String,
    config: Option<String>,
    seed: u64,
    started: Instant,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: Option<&Path>, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config: config.map(|p| p.display().to_string()),
            seed,
            started: Instant::now(),
            outputs: Vec::new(),
        }
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Write the manifest JSON next to the outputs and return its path.
    pub fn write(self, out_dir: &Path) -> std::io::Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command.clone(),
            config: self.config,
            seed: self.seed,
            workers: rayon::current_num_threads(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            outputs: self
                .outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
        };
        let path = out_dir.join(format!("{}_manifest.json", self.command));
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }
}
