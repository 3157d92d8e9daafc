//! Contrastive objective with in-batch positives and hard negatives.
//!
//! For anchors `f_i`, positives `f⁺_j`, and negatives `f⁻_j`:
//!
//! ```text
//! L = -(1/N) Σ_i log( exp(cos(f_i, f⁺_i)/τ) / Σ_j [exp(cos(f_i, f⁺_j)/τ) + exp(cos(f_i, f⁻_j)/τ)] )
//! ```
//!
//! The denominator runs over every j, including j = i.

use super::AdaptError;
use crate::embed_store::{dot, norm};

#[derive(Debug, Clone, PartialEq)]
pub struct LossBatch {
    /// N×d row-major matrices with aligned rows.
    pub anchors: Vec<f64>,
    pub positives: Vec<f64>,
    pub negatives: Vec<f64>,
    pub n: usize,
    pub dim: usize,
    pub tau: f64,
}

impl LossBatch {
    pub fn from_rows(
        anchors: &[Vec<f64>],
        positives: &[Vec<f64>],
        negatives: &[Vec<f64>],
        tau: f64,
    ) -> Result<Self, AdaptError> {
        let n = anchors.len();
        let dim = anchors.first().map_or(0, Vec::len);
        let all = anchors.iter().chain(positives).chain(negatives);
        if n == 0 || positives.len() != n || negatives.len() != n || all.clone().any(|r| r.len() != dim) {
            return Err(AdaptError::BatchShape);
        }
        let batch = Self {
            anchors: anchors.concat(),
            positives: positives.concat(),
            negatives: negatives.concat(),
            n,
            dim,
            tau,
        };
        batch.check()?;
        Ok(batch)
    }

    pub fn check(&self) -> Result<(), AdaptError> {
        let want = self.n * self.dim;
        if self.n == 0
            || self.dim == 0
            || self.anchors.len() != want
            || self.positives.len() != want
            || self.negatives.len() != want
        {
            return Err(AdaptError::BatchShape);
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(AdaptError::BadTemperature(self.tau));
        }
        Ok(())
    }

    pub fn anchor(&self, i: usize) -> &[f64] {
        &self.anchors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positive(&self, i: usize) -> &[f64] {
        &self.positives[i * self.dim..(i + 1) * self.dim]
    }

    pub fn negative(&self, i: usize) -> &[f64] {
        &self.negatives[i * self.dim..(i + 1) * self.dim]
    }
}

/// Per-row norms; a zero norm leaves cosine undefined.
pub(crate) fn norms(m: &[f64], dim: usize, role: &'static str) -> Result<Vec<f64>, AdaptError> {
    m.chunks_exact(dim)
        .enumerate()
        .map(|(i, r)| match norm(r) {
            n if n > 0.0 => Ok(n),
            _ => Err(AdaptError::ZeroNorm { role, row: i }),
        })
        .collect()
}

/// Cosine similarities of each anchor against every positive and negative,
/// N×N each.
pub(crate) struct Cosines {
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
    pub anchor_norms: Vec<f64>,
    pub pos_norms: Vec<f64>,
    pub neg_norms: Vec<f64>,
}

pub(crate) fn cosines(batch: &LossBatch) -> Result<Cosines, AdaptError> {
    batch.check()?;
    let (n, d) = (batch.n, batch.dim);
    let anchor_norms = norms(&batch.anchors, d, "anchor")?;
    let pos_norms = norms(&batch.positives, d, "positive")?;
    let neg_norms = norms(&batch.negatives, d, "negative")?;
    let mut pos = vec![0.0; n * n];
    let mut neg = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            pos[i * n + j] = dot(batch.anchor(i), batch.positive(j)) / (anchor_norms[i] * pos_norms[j]);
            neg[i * n + j] = dot(batch.anchor(i), batch.negative(j)) / (anchor_norms[i] * neg_norms[j]);
        }
    }
    Ok(Cosines {
        pos,
        neg,
        anchor_norms,
        pos_norms,
        neg_norms,
    })
}

/// Row-wise softmax over the 2N logits `[cos⁺_i· / τ, cos⁻_i· / τ]`.
/// Returns (softmax over positives, softmax over negatives).
pub(crate) fn softmax_rows(c: &Cosines, n: usize, tau: f64) -> (Vec<f64>, Vec<f64>) {
    let mut sp = vec![0.0; n * n];
    let mut sn = vec![0.0; n * n];
    for i in 0..n {
        let row_p = &c.pos[i * n..(i + 1) * n];
        let row_n = &c.neg[i * n..(i + 1) * n];
        let max = row_p
            .iter()
            .chain(row_n)
            .fold(f64::NEG_INFINITY, |m, &x| m.max(x / tau));
        let mut z = 0.0;
        for j in 0..n {
            sp[i * n + j] = (row_p[j] / tau - max).exp();
            sn[i * n + j] = (row_n[j] / tau - max).exp();
            z += sp[i * n + j] + sn[i * n + j];
        }
        for j in 0..n {
            sp[i * n + j] /= z;
            sn[i * n + j] /= z;
        }
    }
    (sp, sn)
}

pub fn info_nce_loss(batch: &LossBatch) -> Result<f64, AdaptError> {
    let c = cosines(batch)?;
    let n = batch.n;
    let tau = batch.tau;
    let total: f64 = (0..n).map(|i| row_loss(&c, n, i, tau)).sum();
    Ok(total / n as f64)
}

/// −log softmax of the positive logit in row `i`, shifted by that logit so
/// the result stays strictly positive whenever any other term is
/// representable.
pub(crate) fn row_loss(c: &Cosines, n: usize, i: usize, tau: f64) -> f64 {
    let own = c.pos[i * n + i] / tau;
    let others = c.pos[i * n..(i + 1) * n]
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &x)| x)
        .chain(c.neg[i * n..(i + 1) * n].iter().copied())
        .map(|x| x / tau - own);
    let max = others.clone().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        // e^own dominates: log(1 + Σ e^(x − own)) without cancellation.
        others.map(f64::exp).sum::<f64>().ln_1p()
    } else {
        let z: f64 = others.map(|x| (x - max).exp()).sum::<f64>() + (-max).exp();
        max + z.ln()
    }
}
