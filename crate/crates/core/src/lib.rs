//! Recovery of low-rank nonnegative matrices from sparse noisy samples.
//!
//! The main entry point is [`curated_svd`], which regularizes an observed
//! matrix by its row and column degrees, repeatedly zeroes a small set of
//! rows that dominate the top singular directions, and returns the
//! de-regularized rank-`r` truncation.

pub mod bench;
pub mod curated;
pub mod error;
pub mod io;
pub mod lemmas;
pub mod models;
pub mod oracles;
pub mod regularization;
pub mod spectral;
pub mod types;

pub use curated::{curated_svd, curated_svd_once, greedy_knapsack, CuratedOutcome, Thresholds};
pub use error::{Error, Result};
pub use models::{gen_model, sample, sample_with, ModelShape, ModelSpec, SamplerOptions};
pub use regularization::{compute_weights, deregularize, regularize};
pub use spectral::{rw_svd, truncated_svd};
pub use types::{
    n_avg, CuratedConfig, Entries, ModelKind, ModelMatrix, Observation, RegWeights, RowSet, SparseMatrix,
    SvdResult,
};
