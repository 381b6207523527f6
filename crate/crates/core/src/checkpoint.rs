//! Versioned JSON checkpoints.
//!
//! A checkpoint holds the architecture descriptor, the flat parameter
//! values, and optionally the position of the training RNG stream. Values
//! are serialized with shortest-round-trip float formatting, so
//! save -> load reproduces every scalar bit-exactly (for `f32` sources the
//! widen/narrow pair is also exact).

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};
use crate::params::{MlpArch, ModelParams};
use crate::scalar::{real, Real};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Position of a ChaCha8 stream, split into two words so the container
/// stays plain-JSON friendly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub word_pos_hi: u64,
    pub word_pos_lo: u64,
}

impl RngState {
    pub fn new(seed: u64, word_pos: u128) -> Self {
        RngState {
            seed,
            word_pos_hi: (word_pos >> 64) as u64,
            word_pos_lo: word_pos as u64,
        }
    }

    pub fn word_pos(&self) -> u128 {
        ((self.word_pos_hi as u128) << 64) | self.word_pos_lo as u128
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    arch: MlpArch,
    values: Vec<f64>,
    rng: Option<RngState>,
}

pub fn save_checkpoint<R: Real>(
    path: &Path,
    params: &ModelParams<R>,
    rng: Option<RngState>,
) -> CoreResult<()> {
    params.validate()?;
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        arch: params.arch.clone(),
        values: params
            .values
            .iter()
            .map(|v| v.to_f64().expect("scalar widens to f64"))
            .collect(),
        rng,
    };
    let out = fs::File::create(path)
        .map_err(|e| CoreError::Checkpoint(format!("create {}: {e}", path.display())))?;
    serde_json::to_writer(BufWriter::new(out), &file)
        .map_err(|e| CoreError::Checkpoint(format!("serialize {}: {e}", path.display())))?;
    Ok(())
}

pub fn load_checkpoint<R: Real>(path: &Path) -> CoreResult<(ModelParams<R>, Option<RngState>)> {
    let input = fs::File::open(path)
        .map_err(|e| CoreError::Checkpoint(format!("open {}: {e}", path.display())))?;
    let file: CheckpointFile = serde_json::from_reader(BufReader::new(input))
        .map_err(|e| CoreError::Checkpoint(format!("parse {}: {e}", path.display())))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(CoreError::Checkpoint(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            file.version
        )));
    }
    let params = ModelParams {
        arch: file.arch,
        values: file.values.iter().map(|&v| real::<R>(v)).collect(),
    };
    params.validate().map_err(|e| CoreError::Checkpoint(format!("invalid payload: {e}")))?;
    Ok((params, file.rng))
}
