// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON reports with provenance, and a plain-text table renderer.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::tensor_io::sha256_file;

#[derive(Debug, Clone, Serialize)]
pub struct InputFingerprint {
    pub path: PathBuf,
    pub sha256: String,
}

/// Machine-readable record of one command run: the merged configuration,
/// input hashes and command-specific results.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub config: Value,
    pub inputs: BTreeMap<String, InputFingerprint>,
    pub results: Value,
}

impl Report {
    pub fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: serde_json::to_value(config)?,
            inputs: BTreeMap::new(),
            results: Value::Null,
        })
    }

    /// Record the SHA-256 of an input file under `name`.
    pub fn input(&mut self, name: impl Into<String>, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(Error::MissingPath(path.to_path_buf()));
        }
        let sha256 = sha256_file(path)?;
        self.inputs.insert(
            name.into(),
            InputFingerprint {
                path: path.to_path_buf(),
                sha256,
            },
        );
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Left-aligned first column, right-aligned remaining columns.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in width.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let mut out = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i == 0 {
                out.push_str(&format!("{c:<w$}", w = width[0]));
            } else {
                out.push_str(&format!("  {c:>w$}", w = width[i]));
            }
        }
        out.trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (cols - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

pub fn fmt_num(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "-".into(),
    }
}
