//! Embedding bundles: on-disk format, in-memory matrix and the join to a
//! [`Dataset`].
//!
//! A bundle directory holds three files:
//!
//! * `meta.json` with `model_id`, `masked`, `layer_policy`, `dim`, `count`
//! * `manifest.txt`, one instance id per line, row order
//! * `vectors.f32le`, `count * dim` little-endian binary32 values, row-major
//!
//! The in-memory matrix is generic over [`Scalar`]; the file is always
//! binary32, so an `f32` bundle round-trips bit-exactly.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const META_FILE: &str = "meta.json";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const VECTORS_FILE: &str = "vectors.f32le";

/// The only layer policy produced by the extractor.
pub const LAYER_POLICY: &str = "avg-last-4";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariantTag {
    pub model_id: String,
    pub masked: bool,
    pub layer_policy: String,
}

impl VariantTag {
    pub fn new(model_id: impl Into<String>, masked: bool) -> Self {
        Self {
            model_id: model_id.into(),
            masked,
            layer_policy: LAYER_POLICY.to_string(),
        }
    }

    /// Conventional short graph name: `G_b`, `G_s`, `G_mb`, `G_ms` for the
    /// baseline (`bert*`) and sense-enhanced models, otherwise the model id
    /// with an `_masked` suffix when applicable.
    pub fn graph_name(&self) -> String {
        let id = self.model_id.to_ascii_lowercase();
        let base = if id == "bert" || id.starts_with("bert-") {
            Some("b")
        } else if id.contains("sense") {
            Some("s")
        } else {
            None
        };
        match (base, self.masked) {
            (Some(b), false) => format!("G_{b}"),
            (Some(b), true) => format!("G_m{b}"),
            (None, false) => self.model_id.clone(),
            (None, true) => format!("{}_masked", self.model_id),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    model_id: String,
    masked: bool,
    layer_policy: String,
    dim: usize,
    count: usize,
}

/// Fixed-dimension vectors keyed by instance id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBundle<T: Scalar> {
    variant: VariantTag,
    dim: usize,
    ids: Vec<String>,
    data: Vec<T>,
    row_of: HashMap<String, usize>,
}

impl<T: Scalar> EmbeddingBundle<T> {
    /// Validates shape, id uniqueness, finiteness and non-zero rows.
    pub fn new(variant: VariantTag, dim: usize, ids: Vec<String>, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Bundle("dim must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::Bundle(format!(
                "matrix has {} values, expected {} rows x {} dims",
                data.len(),
                ids.len(),
                dim
            )));
        }
        let mut row_of = HashMap::with_capacity(ids.len());
        for (row, id) in ids.iter().enumerate() {
            if row_of.insert(id.clone(), row).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
            let v = &data[row * dim..(row + 1) * dim];
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    row,
                    id: id.clone(),
                });
            }
            if v.iter().all(|x| x.is_zero()) {
                return Err(Error::ZeroNorm {
                    row,
                    id: id.clone(),
                });
            }
        }
        Ok(Self {
            variant,
            dim,
            ids,
            data,
            row_of,
        })
    }

    pub fn variant(&self) -> &VariantTag {
        &self.variant
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.row_of.get(id).copied()
    }

    pub fn vector(&self, id: &str) -> Option<&[T]> {
        self.row_index(id).map(|i| self.row(i))
    }

    /// Row-major matrix values.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Encodes the matrix as the `vectors.f32le` byte stream.
    pub fn vector_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * 4);
        for x in &self.data {
            out.extend_from_slice(&x.to_f32_bits().to_le_bytes());
        }
        out
    }
}

/// Writes a bundle directory, creating it if needed. Output bytes depend only
/// on the bundle contents.
pub fn write_bundle<T: Scalar>(b: &EmbeddingBundle<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let meta = Meta {
        model_id: b.variant.model_id.clone(),
        masked: b.variant.masked,
        layer_policy: b.variant.layer_policy.clone(),
        dim: b.dim,
        count: b.len(),
    };
    let mut meta_json = serde_json::to_vec_pretty(&meta)?;
    meta_json.push(b'\n');
    write_file(&dir.join(META_FILE), &meta_json)?;

    let mut manifest = Vec::new();
    for id in &b.ids {
        manifest.extend_from_slice(id.as_bytes());
        manifest.push(b'\n');
    }
    write_file(&dir.join(MANIFEST_FILE), &manifest)?;
    write_file(&dir.join(VECTORS_FILE), &b.vector_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

/// Loads and validates a bundle directory.
pub fn load_bundle<T: Scalar>(dir: impl AsRef<Path>) -> Result<EmbeddingBundle<T>> {
    let dir = dir.as_ref();
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read(&p).map_err(|e| Error::io(p, e))
    };

    let meta: Meta = serde_json::from_slice(&read(META_FILE)?)?;
    if meta.layer_policy != LAYER_POLICY {
        return Err(Error::Bundle(format!(
            "unsupported layer policy {:?}",
            meta.layer_policy
        )));
    }

    let manifest = String::from_utf8(read(MANIFEST_FILE)?)
        .map_err(|_| Error::Bundle("manifest is not valid UTF-8".into()))?;
    let ids: Vec<String> = manifest.lines().map(str::to_string).collect();
    if ids.len() != meta.count {
        return Err(Error::Bundle(format!(
            "manifest lists {} ids, meta count is {}",
            ids.len(),
            meta.count
        )));
    }

    let blob = read(VECTORS_FILE)?;
    let expected = (meta.count as u64) * (meta.dim as u64) * 4;
    if blob.len() as u64 != expected {
        return Err(Error::BlobSize {
            expected,
            actual: blob.len() as u64,
            count: meta.count,
            dim: meta.dim,
        });
    }
    let data = blob
        .chunks_exact(4)
        .map(|c| T::from_f32_bits(u32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();

    EmbeddingBundle::new(
        VariantTag {
            model_id: meta.model_id,
            masked: meta.masked,
            layer_policy: meta.layer_policy,
        },
        meta.dim,
        ids,
        data,
    )
}

/// A dataset joined one-to-one with a bundle.
///
/// Node `i` of the corpus is dataset record `i`; `row(i)` is its vector.
#[derive(Debug, Clone)]
pub struct AlignedCorpus<'a, T: Scalar> {
    dataset: &'a Dataset,
    bundle: &'a EmbeddingBundle<T>,
    rows: Vec<usize>,
}

/// Joins a bundle to a dataset by instance id. Fails with the complete id
/// diff when the two sides do not match exactly.
pub fn align<'a, T: Scalar>(
    bundle: &'a EmbeddingBundle<T>,
    dataset: &'a Dataset,
) -> Result<AlignedCorpus<'a, T>> {
    let mut missing = Vec::new();
    let mut rows = Vec::with_capacity(dataset.len());
    for r in dataset.records() {
        match bundle.row_index(&r.instance_id) {
            Some(i) => rows.push(i),
            None => missing.push(r.instance_id.clone()),
        }
    }
    let extra: Vec<String> = bundle
        .ids()
        .iter()
        .filter(|id| dataset.get(id).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Alignment { missing, extra });
    }
    debug_assert_eq!(rows.iter().collect::<HashSet<_>>().len(), rows.len());
    Ok(AlignedCorpus {
        dataset,
        bundle,
        rows,
    })
}

impl<'a, T: Scalar> AlignedCorpus<'a, T> {
    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn bundle(&self) -> &'a EmbeddingBundle<T> {
        self.bundle
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Vector of node `i` (dataset record order).
    pub fn row(&self, i: usize) -> &'a [T] {
        self.bundle.row(self.rows[i])
    }

    pub fn id(&self, i: usize) -> &'a str {
        &self.dataset.records()[i].instance_id
    }

    pub fn lemma(&self, i: usize) -> &'a str {
        &self.dataset.records()[i].lemma
    }
}
