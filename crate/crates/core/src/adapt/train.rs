use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{ToyEncoder, Vocab};
use super::grad::{batch_loss, loss_gradient};
use super::{AdaptError, NliTriplet};
use crate::embed_store::{dot, norm};

/// Uniform init range for every parameter.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub tau: f64,
    pub seed: u64,
    pub dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            learning_rate: 0.05,
            tau: 0.05,
            seed: 0,
            dim: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    /// Mean loss over the fixed evaluation batches before the first update.
    pub initial_loss: f64,
    /// Same measurement after the last update.
    pub final_loss: f64,
    /// Mean of the minibatch losses seen during each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    pub vocab_size: usize,
}

/// Mean loss over consecutive, unshuffled batches of `batch_size`.
pub fn dataset_loss(
    enc: &ToyEncoder,
    triplets: &[NliTriplet],
    batch_size: usize,
    tau: f64,
) -> Result<f64, AdaptError> {
    let mut total = 0.0;
    for chunk in triplets.chunks(batch_size.max(1)) {
        total += batch_loss(enc, chunk, tau)? * chunk.len() as f64;
    }
    Ok(total / triplets.len() as f64)
}

/// Mean cosine of anchor to positive and of anchor to negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub mean_cos_positive: f64,
    pub mean_cos_negative: f64,
}

impl Separation {
    pub fn margin(&self) -> f64 {
        self.mean_cos_positive - self.mean_cos_negative
    }
}

pub fn separation(enc: &ToyEncoder, triplets: &[NliTriplet]) -> Result<Separation, AdaptError> {
    if triplets.is_empty() {
        return Err(AdaptError::NoTriplets);
    }
    let cos = |a: &[f64], b: &[f64], role| {
        let (na, nb) = (norm(a), norm(b));
        if na == 0.0 || nb == 0.0 {
            return Err(AdaptError::ZeroNorm { role, row: 0 });
        }
        Ok(dot(a, b) / (na * nb))
    };
    let (mut pos, mut neg) = (0.0, 0.0);
    for t in triplets {
        let a = enc.encode(&t.anchor);
        pos += cos(&a, &enc.encode(&t.positive), "positive")?;
        neg += cos(&a, &enc.encode(&t.negative), "negative")?;
    }
    let n = triplets.len() as f64;
    Ok(Separation {
        mean_cos_positive: pos / n,
        mean_cos_negative: neg / n,
    })
}

pub fn init_encoder(triplets: &[NliTriplet], dim: usize, seed: u64) -> ToyEncoder {
    let vocab = Vocab::build(
        triplets
            .iter()
            .flat_map(|t| [t.anchor.as_str(), t.positive.as_str(), t.negative.as_str()]),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ToyEncoder::random(vocab, dim, INIT_SCALE, &mut rng)
}

/// Plain minibatch gradient descent from a seeded random initialization.
pub fn train(triplets: &[NliTriplet], cfg: &TrainConfig) -> Result<(ToyEncoder, TrainSummary), AdaptError> {
    let enc = init_encoder(triplets, cfg.dim, cfg.seed);
    train_from(enc, triplets, cfg)
}

pub fn train_from(
    mut enc: ToyEncoder,
    triplets: &[NliTriplet],
    cfg: &TrainConfig,
) -> Result<(ToyEncoder, TrainSummary), AdaptError> {
    if triplets.is_empty() {
        return Err(AdaptError::NoTriplets);
    }
    if cfg.batch_size == 0 || cfg.dim == 0 {
        return Err(AdaptError::Config("batch_size and dim must be positive".into()));
    }
    if !(cfg.learning_rate >= 0.0 && cfg.learning_rate.is_finite()) {
        return Err(AdaptError::Config("learning_rate must be finite and non-negative".into()));
    }
    for t in triplets {
        t.check()?;
    }
    let initial_loss = dataset_loss(&enc, triplets, cfg.batch_size, cfg.tau)?;

    // Shuffling uses its own stream so it is independent of the init draw.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut order: Vec<usize> = (0..triplets.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<NliTriplet> = idx.iter().map(|&i| triplets[i].clone()).collect();
            let (loss, g) = loss_gradient(&enc, &batch, cfg.tau)?;
            if !loss.is_finite() {
                return Err(AdaptError::Diverged { step });
            }
            sum += loss * batch.len() as f64;
            if cfg.learning_rate > 0.0 {
                for (p, d) in enc.token_table.iter_mut().zip(&g.token_table) {
                    *p -= cfg.learning_rate * d;
                }
                for (p, d) in enc.projection.iter_mut().zip(&g.projection) {
                    *p -= cfg.learning_rate * d;
                }
                if !enc.parameters_finite() {
                    return Err(AdaptError::Diverged { step });
                }
            }
            step += 1;
        }
        let mean = sum / triplets.len() as f64;
        log::debug!("epoch {} mean loss {mean:.6}", epoch_losses.len() + 1);
        epoch_losses.push(mean);
    }
    let final_loss = dataset_loss(&enc, triplets, cfg.batch_size, cfg.tau)?;
    if !final_loss.is_finite() {
        return Err(AdaptError::Diverged { step });
    }
    let summary = TrainSummary {
        initial_loss,
        final_loss,
        epoch_losses,
        steps: step,
        vocab_size: enc.vocab_size(),
    };
    Ok((enc, summary))
}
