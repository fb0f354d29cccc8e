//! Accuracy experiments: corpus generation with ground truth, per-method
//! error records, MSE tables and grouped error summaries.

mod analysis;
mod corpus;
mod runner;

use std::path::PathBuf;

use thiserror::Error;

use crate::argmap::{ArgMapError, GenError};
use crate::coherence::CoherenceError;
use crate::heuristics::HeuristicsError;

pub use analysis::{
    bootstrap_mean_diff, mse, mse_table, mse_where, quantile, robustness_groups, scatter_data,
    BootstrapInterval, ColorKey, GroupKey, GroupSummary, MseTable,
};
pub use corpus::{
    build_corpus, CorpusSpec, MapEntry, Manifest, OpinionPair, OverlapMode, Skip, TruthRow,
    Corpus,
};
pub use runner::{load_records, run_methods, write_records, EvalMethod, EvalRecord, RunConfig};

/// The β grid of the reference MSE table.
pub const BETA_GRID: [f64; 6] = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    ArgMap(#[from] ArgMapError),
    #[error(transparent)]
    Coherence(#[from] CoherenceError),
    #[error(transparent)]
    Heuristics(#[from] HeuristicsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("corpus is inconsistent: {0}")]
    Corrupt(String),
    #[error("unknown group key {0:?}; valid keys: opinion_size, n, alpha")]
    UnknownGroupKey(String),
    #[error("unknown method {0:?}; valid methods: exact, {valid}", valid = crate::heuristics::Method::NAMES.join(", "))]
    UnknownMethod(String),
    #[error("record {record}: stored squared error {stored} does not match {recomputed}")]
    Checksum {
        record: String,
        stored: f64,
        recomputed: f64,
    },
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> EvalError {
    let path = path.into();
    move |source| EvalError::Io { path, source }
}

/// Deterministic seed derivation (splitmix64 finalizer folded over `parts`).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}
