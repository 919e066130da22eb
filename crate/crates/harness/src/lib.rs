//! Experiment harness: config files, training runs, multi-seed matrices,
//! evaluation, and plot-data emission for the differential policy gradient
//! experiments.

pub mod config;
pub mod evaluate;
pub mod matrix;
pub mod plots;
pub mod runlog;
pub mod trainer;

use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Tree(#[from] digrad_core::env::TreeError),
    #[error(transparent)]
    Env(#[from] digrad_core::env::EnvError),
    #[error(transparent)]
    Agent(#[from] digrad_core::agent::AgentError),
    #[error(transparent)]
    Nn(#[from] digrad_core::nn::NnError),
    #[error(transparent)]
    Checkpoint(#[from] digrad_core::nn::CheckpointError),
    #[error(transparent)]
    Log(#[from] runlog::LogError),
    #[error("{what}: expected {expected}, found {found}")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("'{0}' is neither a builtin environment nor a readable tree file")]
    UnknownEnv(String),
    #[error(
        "run {setting}_{seed} aborted at episode {episode}: non-finite values; \
         last good parameters checkpointed to {checkpoint}"
    )]
    RunAborted {
        setting: String,
        seed: u64,
        episode: u32,
        checkpoint: PathBuf,
    },
    #[error("{what}: {msg}")]
    Malformed { what: &'static str, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
