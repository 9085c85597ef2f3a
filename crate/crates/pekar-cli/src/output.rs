//! Everything a run writes lives under one directory indexed by
//! `manifest.json`.

use crate::report::{check_finite, to_json, RunReport, Status, SCHEMA_VERSION};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: String,
    pub command: String,
    pub status: Status,
    pub files: Vec<ManifestEntry>,
}

pub struct OutputDir {
    root: PathBuf,
    files: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<OutputDir> {
        std::fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Notes a file written by someone else.
    pub fn record(&mut self, name: &str, kind: &str) {
        self.files.retain(|e| e.path != name);
        self.files.push(ManifestEntry {
            path: name.to_string(),
            kind: kind.to_string(),
        });
    }

    pub fn write(&mut self, name: &str, kind: &str, contents: &[u8]) -> std::io::Result<()> {
        std::fs::write(self.path(name), contents)?;
        self.record(name, kind);
        Ok(())
    }

    /// Writes `report.json` after checking that every number is finite.
    pub fn write_report(&mut self, report: &RunReport) -> Result<(), String> {
        check_finite(report)?;
        let text = to_json(report).map_err(|e| e.to_string())?;
        self.write("report.json", "run_report", text.as_bytes()).map_err(|e| e.to_string())
    }

    pub fn finish(mut self, command: &str, status: Status) -> std::io::Result<()> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION.to_string(),
            command: command.to_string(),
            status,
            files: self.files,
        };
        let text = to_json(&manifest).map_err(std::io::Error::other)?;
        std::fs::write(self.root.join("manifest.json"), text)
    }
}
