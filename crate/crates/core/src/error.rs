use std::path::PathBuf;

use thiserror::Error;

/// Violations of domain-type invariants.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate seed entity `{0}`")]
    DuplicateEntity(String),
    #[error("empty seed entity id")]
    EmptyEntity,
    #[error("duplicate seed label `{0}` (labels compare case- and whitespace-insensitively)")]
    DuplicateLabel(String),
    #[error("seed label `{0:?}` is empty after normalization")]
    EmptyLabel(String),
    #[error("invalid scoring parameter {name}: {value} ({expected})")]
    InvalidParam {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("missing manifest in {}", .0.display())]
    MissingManifest(PathBuf),
    #[error("index format version mismatch: found {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("malformed manifest: {0}")]
    BadManifest(String),
    #[error("checksum mismatch for {file}: index directory is corrupt")]
    Checksum { file: String },
    #[error("{structure}: {source}")]
    Io {
        structure: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{structure}: {source}")]
    Codec {
        structure: String,
        #[source]
        source: bincode::Error,
    },
}

/// Failures of a suggestion query against a loaded index.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("row population requires at least one seed entity")]
    EmptySeedEntities,
    #[error("column population requires a non-empty seed")]
    EmptySeed,
    #[error("unknown entity ids: {}", .0.join(", "))]
    UnknownEntities(Vec<String>),
}
