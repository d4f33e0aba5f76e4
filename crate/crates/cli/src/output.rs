use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Map<String, Value>,
    pub seed: u64,
    pub tool_version: String,
    pub outputs: Vec<String>,
}

/// Collects output files under one directory and stamps them with the manifest.
pub struct Run {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    pub fn new(dir: &Path, command: &str, parameters: Map<String, Value>, seed: u64) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Run {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                parameters,
                seed,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                outputs: Vec::new(),
            },
        })
    }

    /// Writes a CSV whose first line points at the manifest.
    pub fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<(), CliError> {
        let mut s = format!("# manifest: {MANIFEST}\n{header}\n");
        for r in rows {
            s.push_str(&r);
            s.push('\n');
        }
        self.file(name, s)
    }

    /// Writes a JSON object with a `manifest` field added.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<(), CliError> {
        let mut v = serde_json::to_value(body).map_err(|e| CliError::Other(e.to_string()))?;
        if let Value::Object(m) = &mut v {
            m.insert("manifest".into(), Value::String(MANIFEST.into()));
        }
        let text = serde_json::to_string_pretty(&v).map_err(|e| CliError::Other(e.to_string()))?;
        self.file(name, text + "\n")
    }

    fn file(&mut self, name: &str, contents: String) -> Result<(), CliError> {
        fs::write(self.dir.join(name), contents)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let path = self.dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Other(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

/// Full-precision float, 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn row(cells: &[String]) -> String {
    let mut s = String::new();
    for (i, c) in cells.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{c}");
    }
    s
}
