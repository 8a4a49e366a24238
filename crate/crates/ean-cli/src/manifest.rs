//! Append-only run manifests. Each run directory contains exactly one
//! `manifest.jsonl`: a start line with the resolved config, then an end line
//! with status and artifact paths.

use crate::config::RunConfig;
use ean::error::{Error, Result};
use serde::Serialize;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Serialize)]
struct StartLine<'a> {
    event: &'static str,
    command: &'a str,
    config_path: Option<String>,
    seed: u64,
    timestamp: String,
    tool_version: &'static str,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct EndLine<'a> {
    event: &'static str,
    timestamp: String,
    status: &'a str,
    artifacts: &'a [String],
}

pub struct Manifest {
    path: PathBuf,
    artifacts: Vec<String>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

impl Manifest {
    /// Create the run directory and write the start line. Refuses to reuse a
    /// directory that already holds a manifest.
    pub fn start(
        run_dir: &Path,
        command: &str,
        config_path: Option<&Path>,
        config: &RunConfig,
    ) -> Result<Manifest> {
        std::fs::create_dir_all(run_dir)?;
        let path = run_dir.join(MANIFEST_NAME);
        if path.exists() {
            return Err(Error::InvalidConfig(format!(
                "{} already contains a manifest; choose a fresh --out directory",
                run_dir.display()
            )));
        }
        let line = StartLine {
            event: "start",
            command,
            config_path: config_path.map(|p| p.display().to_string()),
            seed: config.seed,
            timestamp: now(),
            tool_version: env!("CARGO_PKG_VERSION"),
            config,
        };
        let mut file = File::create(&path)?;
        serde_json::to_writer(&mut file, &line)?;
        file.write_all(b"\n")?;
        file.flush()?;
        Ok(Manifest {
            path,
            artifacts: Vec::new(),
        })
    }

    /// Register an artifact path (relative to the run directory).
    pub fn add_artifact(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    /// Append the end line.
    pub fn finish(self, status: &str) -> Result<()> {
        let line = EndLine {
            event: "end",
            timestamp: now(),
            status,
            artifacts: &self.artifacts,
        };
        let mut file = OpenOptions::new().append(true).open(&self.path)?;
        serde_json::to_writer(&mut file, &line)?;
        file.write_all(b"\n")?;
        file.flush()?;
        Ok(())
    }
}
