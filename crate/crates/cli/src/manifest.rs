use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use eigenmech::reduction::ReductionConfig;
use eigenmech::Result;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Privacy {
    pub eps: f64,
    pub delta: f64,
}

/// Everything needed to repeat a command: the exact arguments plus the
/// resolved parameters they produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub inputs: BTreeMap<String, String>,
    pub domain: Option<serde_json::Value>,
    pub privacy: Option<Privacy>,
    pub seed: Option<u64>,
    pub reduction: Option<ReductionConfig>,
    pub outputs: Vec<String>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            argv: std::env::args().skip(1).collect(),
            inputs: BTreeMap::new(),
            domain: None,
            privacy: None,
            seed: None,
            reduction: None,
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) {
        self.inputs.insert(role.into(), path.display().to_string());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn domain(&mut self, value: &impl Serialize) {
        self.domain = serde_json::to_value(value).ok();
    }

    /// Writes the manifest next to `primary` and returns its path.
    pub fn write(&mut self, primary: &Path) -> Result<PathBuf> {
        let path = sibling(primary, "manifest.json");
        self.output(&path);
        write_json(&path, self)?;
        Ok(path)
    }
}

/// `dir/name.ext` → `dir/name.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| std::io::Error::other(e.to_string()))?;
    text.push('\n');
    eigenmech::io::write_atomic(path, text.as_bytes())
}
