use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;

/// Provenance record written next to every run's outputs. Re-running with
/// the same config and seed reproduces every listed file byte for byte;
/// only the timestamps here change.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    pub version: &'static str,
    pub threads: Option<usize>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub exit_code: i32,
    pub outputs: Vec<String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Tracks files written under the output directory.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> std::io::Result<()> {
        let p = self.path(name);
        std::fs::write(p, contents)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn into_names(self) -> Vec<String> {
        self.written
    }
}
