//! Labeled datasets: generation, ingestion, mining, splitting.

pub mod generate;
pub mod ingest;
pub mod mine;
pub mod review;
pub mod sample;
pub mod split;
pub mod stats;

pub use generate::{generate_synthetic, generate_synthetic_with};
pub use ingest::{ingest_synthetic, read_manifest};
pub use mine::{mine_repo, CommitFilter, MineReport, MinedCorpus};
pub use sample::{read_jsonl, sample_id, write_jsonl, Label, Provenance, ProvenanceKind, Sample};
pub use split::{split, SplitSpec};
pub use stats::{dataset_stats, DatasetStats};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad JSON on line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error("manifest mismatch: {unlabeled:?} have no label, {missing:?} have no file")]
    ManifestMismatch { unlabeled: Vec<String>, missing: Vec<String> },
    #[error("sample from {0} has empty code")]
    EmptyCode(String),
    #[error("class {label} has {count} samples, at least 3 are needed")]
    ClassTooSmall { label: Label, count: usize },
    #[error("split fractions must be positive and sum to 1, got {0:?}")]
    BadFractions([f64; 3]),
    #[error("git: {0}")]
    Git(String),
    #[error("no commit matched the filter")]
    NoMatches,
    #[error("invalid filter: {0}")]
    Filter(String),
}
