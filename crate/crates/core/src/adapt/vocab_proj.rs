//! Projecting an embedding onto vocabulary tokens.

use super::encoder::ToyEncoder;
use super::AdaptError;
use crate::embed_store::{dot, norm};

#[derive(Debug, Clone, PartialEq)]
pub struct VocabProjection {
    /// V×d row-major; logits = matrix · embedding.
    pub matrix: Vec<f64>,
    pub vocab: Vec<String>,
    pub dim: usize,
}

impl VocabProjection {
    pub fn new(matrix: Vec<f64>, vocab: Vec<String>, dim: usize) -> Result<Self, AdaptError> {
        if vocab.is_empty() || dim == 0 || matrix.len() != vocab.len() * dim {
            return Err(AdaptError::DimMismatch {
                expected: vocab.len() * dim,
                actual: matrix.len(),
            });
        }
        Ok(Self { matrix, vocab, dim })
    }

    /// The encoder's output head: row v is the unit-normalized embedding of
    /// token v on its own, so each logit is the embedding's component along
    /// that token's direction.
    pub fn from_encoder(enc: &ToyEncoder) -> Self {
        let d = enc.dim;
        let mut matrix = Vec::with_capacity(enc.vocab_size() * d);
        for v in 0..enc.vocab_size() {
            let row = enc.encode_ids(&[v]);
            let n = norm(&row);
            matrix.extend(row.iter().map(|x| if n > 0.0 { x / n } else { 0.0 }));
        }
        Self {
            matrix,
            vocab: enc.vocab.tokens().to_vec(),
            dim: d,
        }
    }

    pub fn logits(&self, embedding: &[f64]) -> Result<Vec<f64>, AdaptError> {
        if embedding.len() != self.dim {
            return Err(AdaptError::DimMismatch {
                expected: self.dim,
                actual: embedding.len(),
            });
        }
        Ok(self.matrix.chunks_exact(self.dim).map(|r| dot(r, embedding)).collect())
    }
}

/// The `k` highest-logit tokens, descending; ties go to the lower vocab index.
pub fn topk_tokens(
    embedding: &[f64],
    proj: &VocabProjection,
    k: usize,
) -> Result<Vec<(String, f64)>, AdaptError> {
    if k == 0 || k > proj.vocab.len() {
        return Err(AdaptError::BadK {
            k,
            vocab: proj.vocab.len(),
        });
    }
    let logits = proj.logits(embedding)?;
    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| (proj.vocab[i].clone(), logits[i]))
        .collect())
}
