//! Desk-scale experiment harness over the numeric core: a conditioned 2-D
//! mixture task, denoising pretraining, group-preference post-training with
//! pairwise and policy-gradient baselines, evaluation metrics, and an
//! ablation driver.
//!
//! Everything a run does is a pure function of its resolved configuration
//! and seed: sampling streams are derived from the run seed with fixed
//! tags, evaluation uses its own fixed seeds so different runs score the
//! same model identically, and all timing information is kept out of the
//! deterministic outputs.

pub mod ablate;
pub mod config;
pub mod eval;
pub mod manifest;
pub mod metrics;
pub mod output;
pub mod posttrain;
pub mod pretrain;
pub mod svg;
pub mod swd;
pub mod task;

use std::path::PathBuf;

use dgpo_core::CoreError;
use thiserror::Error;

/// Harness-level failure, split by whether the problem is the
/// configuration (CLI exit 2) or the run itself (CLI exit 3).
#[derive(Debug, Error)]
pub enum LabError {
    /// The configuration cannot be used: parse failure, invalid field,
    /// or an unusable combination of settings.
    #[error("config error: {0}")]
    Config(String),
    /// A runtime precondition failed while executing a run.
    #[error("{0}")]
    Runtime(String),
    /// Filesystem failure with the path that caused it.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Numeric-core failure bubbled up from a trainer or sampler.
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl LabError {
    pub fn config(msg: impl Into<String>) -> Self {
        LabError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        LabError::Runtime(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    /// Process exit status for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            _ => 3,
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
