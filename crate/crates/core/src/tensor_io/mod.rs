// SPDX-License-Identifier: MIT OR Apache-2.0

//! Activation matrices, label tables and concept dictionaries, together with
//! their on-disk formats (`.npy` payloads plus JSON sidecars).

pub mod npy;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CONCEPTS_FILE: &str = "concepts.npy";
pub const CONCEPTS_META_FILE: &str = "concepts.meta.json";
pub const LABELS_META_FILE: &str = "labels.meta.json";

/// Dense `n_samples × dim` float32 matrix stored row-major.
///
/// Used for activations and, more generally, for any 2-D float32 array the
/// crate reads or writes. Constructors reject empty shapes and non-finite
/// entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix {
    n_samples: usize,
    dim: usize,
    data: Vec<f32>,
}

impl ActivationMatrix {
    pub fn new(n_samples: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if n_samples == 0 || dim == 0 {
            return Err(Error::Shape(format!(
                "matrix must be non-empty, got {n_samples}×{dim}"
            )));
        }
        if data.len() != n_samples * dim {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {n_samples}×{dim} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value {} at row {}, column {}",
                data[pos],
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self {
            n_samples,
            dim,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("rows have differing lengths".into()));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.n_samples {
                return Err(Error::Index {
                    what: "matrix rows",
                    index: i,
                    len: self.n_samples,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.dim, data)
    }

    /// SHA-256 of the little-endian payload, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n_samples as u64).to_le_bytes());
        hasher.update((self.dim as u64).to_le_bytes());
        for v in &self.data {
            hasher.update(v.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<ActivationMatrix> {
    let arr = npy::read(path.as_ref())?;
    ActivationMatrix::new(arr.rows, arr.cols, arr.data).map_err(|e| match e {
        Error::Shape(msg) => Error::Format(msg),
        other => other,
    })
}

pub fn write_matrix(m: &ActivationMatrix, path: impl AsRef<Path>) -> Result<()> {
    npy::write(path.as_ref(), m.n_samples, m.dim, &m.data)
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Attribute {
    pub name: String,
    pub values: Vec<u32>,
    pub n_classes: usize,
    pub class_names: Vec<String>,
}

impl Attribute {
    /// Binary indicator of `class` for every sample.
    pub fn indicator(&self, class: usize) -> Vec<bool> {
        self.values.iter().map(|&v| v as usize == class).collect()
    }
}

/// Per-sample class ids for one or more categorical attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTable {
    pub n_samples: usize,
    pub attributes: Vec<Attribute>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributeMeta {
    n_classes: usize,
    #[serde(default)]
    class_names: Vec<String>,
}

impl LabelTable {
    pub fn new(n_samples: usize, attributes: Vec<Attribute>) -> Result<Self> {
        for a in &attributes {
            if a.n_classes < 2 {
                return Err(Error::Schema(format!(
                    "attribute '{}' declares {} classes; need at least 2",
                    a.name, a.n_classes
                )));
            }
            if a.values.len() != n_samples {
                return Err(Error::Schema(format!(
                    "attribute '{}' has {} values for {n_samples} samples",
                    a.name,
                    a.values.len()
                )));
            }
            if let Some((row, v)) = a
                .values
                .iter()
                .enumerate()
                .find(|(_, &v)| v as usize >= a.n_classes)
            {
                return Err(Error::Schema(format!(
                    "attribute '{}' row {row}: class id {v} outside [0, {})",
                    a.name, a.n_classes
                )));
            }
            if !a.class_names.is_empty() && a.class_names.len() != a.n_classes {
                return Err(Error::Schema(format!(
                    "attribute '{}' lists {} class names for {} classes",
                    a.name,
                    a.class_names.len(),
                    a.n_classes
                )));
            }
        }
        Ok(Self {
            n_samples,
            attributes,
        })
    }

    pub fn attribute(&self, name: &str) -> Result<&Attribute> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Config(format!("unknown attribute '{name}'")))
    }

    /// Check that the table pairs with a matrix of `n_samples` rows.
    pub fn check_samples(&self, n_samples: usize) -> Result<()> {
        if self.n_samples != n_samples {
            return Err(Error::Schema(format!(
                "label table has {} rows but activations have {n_samples}",
                self.n_samples
            )));
        }
        Ok(())
    }
}

/// Path of the metadata sidecar that accompanies a labels CSV.
pub fn labels_meta_path(csv_path: &Path) -> PathBuf {
    csv_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(LABELS_META_FILE)
}

/// Read `labels.csv` and its sibling `labels.meta.json`.
pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelTable> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    let meta_path = labels_meta_path(path);
    if !meta_path.exists() {
        return Err(Error::MissingPath(meta_path));
    }
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: BTreeMap<String, AttributeMeta> = serde_json::from_str(&meta_text)
        .map_err(|e| Error::Schema(format!("{}: {e}", meta_path.display())))?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(e.to_string()))?
        .clone();
    if headers.get(0) != Some("sample_index") {
        return Err(Error::Schema(
            "first labels column must be 'sample_index'".into(),
        ));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut columns: Vec<Vec<u32>> = vec![Vec::new(); names.len()];
    let mut n_rows = 0usize;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Schema(format!("row {row}: {e}")))?;
        if record.len() != names.len() + 1 {
            return Err(Error::Schema(format!(
                "row {row} has {} fields, expected {}",
                record.len(),
                names.len() + 1
            )));
        }
        record[0]
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::Schema(format!("row {row}: bad sample_index '{}'", &record[0])))?;
        for (c, field) in record.iter().skip(1).enumerate() {
            let v = field.trim().parse::<u32>().map_err(|_| {
                Error::Schema(format!(
                    "row {row}, column '{}': bad class id '{field}'",
                    names[c]
                ))
            })?;
            columns[c].push(v);
        }
        n_rows += 1;
    }

    let attributes = names
        .into_iter()
        .zip(columns)
        .map(|(name, values)| {
            let m = meta.get(&name).ok_or_else(|| {
                Error::Schema(format!(
                    "attribute '{name}' missing from {LABELS_META_FILE}"
                ))
            })?;
            Ok(Attribute {
                name,
                values,
                n_classes: m.n_classes,
                class_names: m.class_names.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LabelTable::new(n_rows, attributes)
}

/// Write `labels.csv` at `path` and `labels.meta.json` beside it.
pub fn write_labels(table: &LabelTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("sample_index");
    for a in &table.attributes {
        out.push(',');
        out.push_str(&a.name);
    }
    out.push('\n');
    for i in 0..table.n_samples {
        out.push_str(&i.to_string());
        for a in &table.attributes {
            out.push(',');
            out.push_str(&a.values[i].to_string());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))?;

    let meta: BTreeMap<&str, AttributeMeta> = table
        .attributes
        .iter()
        .map(|a| {
            (
                a.name.as_str(),
                AttributeMeta {
                    n_classes: a.n_classes,
                    class_names: a.class_names.clone(),
                },
            )
        })
        .collect();
    let meta_path = labels_meta_path(path);
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)
        .map_err(|e| Error::io(&meta_path, e))
}

// ---------------------------------------------------------------------------
// Concept dictionaries
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptMeta {
    pub method: String,
    pub seed: Option<u64>,
    pub k: usize,
    pub dim: usize,
    pub skew_epsilon: Option<f64>,
    pub normalized: bool,
    pub source_sha256: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// `k × dim` matrix of concept directions and how they were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptDictionary {
    directions: ActivationMatrix,
    meta: ConceptMeta,
}

const UNIT_NORM_TOL: f64 = 1e-5;

impl ConceptDictionary {
    pub fn new(directions: ActivationMatrix, mut meta: ConceptMeta) -> Result<Self> {
        meta.k = directions.n_samples();
        meta.dim = directions.dim();
        for (i, row) in directions.rows().enumerate() {
            let norm = crate::linalg::norm_f32(row);
            if norm == 0.0 {
                return Err(Error::DegenerateDirection(format!(
                    "concept {i} is an all-zero row"
                )));
            }
            if meta.normalized && (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::Schema(format!(
                    "concept {i} has norm {norm} but dictionary is flagged normalized"
                )));
            }
        }
        Ok(Self { directions, meta })
    }

    pub fn k(&self) -> usize {
        self.directions.n_samples()
    }

    pub fn dim(&self) -> usize {
        self.directions.dim()
    }

    pub fn directions(&self) -> &ActivationMatrix {
        &self.directions
    }

    pub fn direction(&self, c: usize) -> &[f32] {
        self.directions.row(c)
    }

    pub fn meta(&self) -> &ConceptMeta {
        &self.meta
    }
}

pub fn write_concepts(dict: &ConceptDictionary, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_matrix(&dict.directions, dir.join(CONCEPTS_FILE))?;
    let meta_path = dir.join(CONCEPTS_META_FILE);
    fs::write(&meta_path, serde_json::to_string_pretty(&dict.meta)?)
        .map_err(|e| Error::io(&meta_path, e))
}

pub fn read_concepts(dir: impl AsRef<Path>) -> Result<ConceptDictionary> {
    let dir = dir.as_ref();
    if !dir.exists() {
        return Err(Error::MissingPath(dir.to_path_buf()));
    }
    let directions = read_matrix(dir.join(CONCEPTS_FILE))?;
    let meta_path = dir.join(CONCEPTS_META_FILE);
    if !meta_path.exists() {
        return Err(Error::MissingPath(meta_path));
    }
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: ConceptMeta = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", meta_path.display())))?;
    if meta.k != directions.n_samples() || meta.dim != directions.dim() {
        return Err(Error::Schema(format!(
            "metadata declares {}×{} but {CONCEPTS_FILE} is {}×{}",
            meta.k,
            meta.dim,
            directions.n_samples(),
            directions.dim()
        )));
    }
    ConceptDictionary::new(directions, meta)
}
