//! Desk-scale retrieval adaptation: a toy mean-pooling text encoder trained
//! with an in-batch contrastive loss over (anchor, positive, hard negative)
//! triplets, plus projection of embeddings onto vocabulary tokens.

pub mod encoder;
pub mod grad;
pub mod loss;
pub mod synthetic;
pub mod train;
pub mod vocab_proj;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use encoder::{ToyEncoder, Vocab};
pub use grad::{loss_gradient, Gradients};
pub use loss::{info_nce_loss, LossBatch};
pub use train::{separation, train, Separation, TrainConfig, TrainSummary};
pub use vocab_proj::{topk_tokens, VocabProjection};

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error("batch matrices must be non-empty with matching shapes")]
    BatchShape,
    #[error("temperature must be positive and finite, got {0}")]
    BadTemperature(f64),
    #[error("{role} row {row} has zero norm; cosine is undefined")]
    ZeroNorm { role: &'static str, row: usize },
    #[error("training needs at least one triplet")]
    NoTriplets,
    #[error("triplet {0} has an empty field")]
    EmptyTriplet(String),
    #[error("loss became non-finite at step {step}")]
    Diverged { step: usize },
    #[error("training config: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("k={k} must be in 1..={vocab}")]
    BadK { k: usize, vocab: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliTriplet {
    pub anchor: String,
    pub positive: String,
    pub negative: String,
}

impl NliTriplet {
    pub fn new(anchor: &str, positive: &str, negative: &str) -> Self {
        Self {
            anchor: anchor.into(),
            positive: positive.into(),
            negative: negative.into(),
        }
    }

    pub fn check(&self) -> Result<(), AdaptError> {
        for (name, text) in [
            ("anchor", &self.anchor),
            ("positive", &self.positive),
            ("negative", &self.negative),
        ] {
            if text.trim().is_empty() {
                return Err(AdaptError::EmptyTriplet(format!("field `{name}`")));
            }
        }
        Ok(())
    }
}

/// Newline-delimited `{"anchor": ..., "positive": ..., "negative": ...}`.
pub fn load_triplets(path: impl AsRef<Path>) -> Result<Vec<NliTriplet>, AdaptError> {
    let path = path.as_ref();
    let io = |e| AdaptError::Io(path.display().to_string(), e);
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let t: NliTriplet = serde_json::from_str(&line).map_err(|e| AdaptError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        t.check().map_err(|_| AdaptError::Malformed {
            line: i + 1,
            message: "empty field".into(),
        })?;
        out.push(t);
    }
    Ok(out)
}

pub fn write_triplets(path: impl AsRef<Path>, triplets: &[NliTriplet]) -> Result<(), AdaptError> {
    let path = path.as_ref();
    let io = |e| AdaptError::Io(path.display().to_string(), e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for t in triplets {
        writeln!(w, "{}", serde_json::to_string(t).expect("triplet serializes")).map_err(io)?;
    }
    w.flush().map_err(io)
}
