use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown semantic type {0:?}")]
    UnknownType(String),

    #[error("unknown sentence label {0:?}")]
    UnknownLabel(String),

    #[error("record {id}: {message}")]
    InvalidRecord { id: String, message: String },

    #[error("duplicate instance id {0:?}")]
    DuplicateId(String),

    #[error("lemma {lemma:?} has conflicting lexical types {first} and {second}")]
    ConflictingLemmaType {
        lemma: String,
        first: String,
        second: String,
    },

    #[error("bundle: {0}")]
    Bundle(String),

    #[error("vector blob has {actual} bytes, expected {expected} (count={count}, dim={dim})")]
    BlobSize {
        expected: u64,
        actual: u64,
        count: usize,
        dim: usize,
    },

    #[error("non-finite value in row {row} ({id})")]
    NonFinite { row: usize, id: String },

    #[error("zero-norm vector at row {row} ({id})")]
    ZeroNorm { row: usize, id: String },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("dataset and bundle ids differ: missing from bundle {missing:?}, extra in bundle {extra:?}")]
    Alignment {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("node {id} has only {available} eligible neighbors, k={k}")]
    InsufficientCandidates {
        id: String,
        available: usize,
        k: usize,
    },

    #[error("unknown instance id {0:?}")]
    UnknownId(String),

    #[error("unknown lemma {0:?}")]
    UnknownLemma(String),

    #[error("invalid k: {0}")]
    InvalidK(usize),

    #[error("empty sample")]
    EmptySample,

    #[error("NaN in sample")]
    NanInSample,

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("could not place {types} centroids with separation >= {min_separation} in dim {dim} after {attempts} attempts")]
    CentroidSeparation {
        types: usize,
        min_separation: f64,
        dim: usize,
        attempts: usize,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
