//! Versioned network checkpoints.
//!
//! The on-disk layout is JSON: layer shapes, activation tags, and parameter
//! arrays in row-major order. Floats are written in shortest round-trip
//! form, so a write/read cycle reproduces every parameter bit-exactly.

use super::{Activation, DenseNetwork, Layer, NnError};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Format(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint contains non-finite parameters")]
    NonFinite,
    #[error("checkpoint layers are inconsistent: {0}")]
    Invalid(#[from] NnError),
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    in_dim: usize,
    units: usize,
    activation: Activation,
    /// Row-major `[units x in_dim]`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    input_dim: usize,
    layers: Vec<LayerRecord>,
}

pub fn save_network(path: &Path, net: &DenseNetwork) -> Result<(), CheckpointError> {
    if !net.params_finite() {
        return Err(CheckpointError::NonFinite);
    }
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        input_dim: net.input_dim(),
        layers: net
            .layers()
            .iter()
            .map(|l| LayerRecord {
                in_dim: l.in_dim(),
                units: l.units(),
                activation: l.activation(),
                weights: l.weights().to_vec(),
                bias: l.bias().to_vec(),
            })
            .collect(),
    };
    let text = serde_json::to_string(&file)?;
    fs::write(path, text).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_network(path: &Path) -> Result<DenseNetwork, CheckpointError> {
    let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: CheckpointFile = serde_json::from_str(&text)?;
    if file.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(file.version));
    }
    let layers: Vec<Layer> = file
        .layers
        .into_iter()
        .map(|r| Layer {
            in_dim: r.in_dim,
            units: r.units,
            activation: r.activation,
            weights: r.weights,
            bias: r.bias,
        })
        .collect();
    let net = DenseNetwork::from_layers(file.input_dim, layers)?;
    if !net.params_finite() {
        return Err(CheckpointError::NonFinite);
    }
    Ok(net)
}
