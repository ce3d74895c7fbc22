use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use recourse_core::model_io::sha256_hex;
use recourse_core::write_atomic;
use serde::Serialize;
use serde_json::Value;

/// Run record written next to every artifact: enough to rerun the command
/// and check that the outputs match.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub argv: Vec<String>,
    pub seeds: BTreeMap<&'static str, u64>,
    pub config: Value,
    pub metrics: BTreeMap<String, f64>,
    /// SHA-256 of each input file.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of each output file.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &'static str, config: Value) -> Self {
        Self {
            tool: "recourse",
            version: env!("CARGO_PKG_VERSION"),
            command,
            argv: std::env::args().collect(),
            seeds: BTreeMap::new(),
            config,
            metrics: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn seed(mut self, name: &'static str, value: u64) -> Self {
        self.seeds.insert(name, value);
        self
    }

    pub fn metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    pub fn input(mut self, path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(self)
    }

    pub fn output(mut self, path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.outputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(self)
    }

    /// Writes `<artifact>.manifest.json` beside `artifact`.
    pub fn write_beside(&self, artifact: &Path) -> Result<PathBuf> {
        let mut name = artifact
            .file_name()
            .context("artifact path has no file name")?
            .to_os_string();
        name.push(".manifest.json");
        let path = artifact.with_file_name(name);
        let text = serde_json::to_string_pretty(self).context("serializing manifest")?;
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
