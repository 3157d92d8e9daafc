//! Analytic gradient of the contrastive loss through the toy encoder.

use super::encoder::ToyEncoder;
use super::loss::{cosines, row_loss, softmax_rows, LossBatch};
use super::{AdaptError, NliTriplet};

/// Gradients with the same layout as the encoder parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub token_table: Vec<f64>,
    pub projection: Vec<f64>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.token_table
            .iter()
            .chain(&self.projection)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Loss value and its gradient with respect to every anchor, positive, and
/// negative embedding row.
#[derive(Debug, Clone)]
pub struct EmbeddingGrads {
    pub loss: f64,
    pub anchors: Vec<f64>,
    pub positives: Vec<f64>,
    pub negatives: Vec<f64>,
}

// d cos(a, b) / d a = b / (|a||b|) - cos · a / |a|²
fn add_cos_grad(out: &mut [f64], a: &[f64], b: &[f64], na: f64, nb: f64, cos: f64, scale: f64) {
    for k in 0..out.len() {
        out[k] += scale * (b[k] / (na * nb) - cos * a[k] / (na * na));
    }
}

pub fn loss_embedding_grads(batch: &LossBatch) -> Result<EmbeddingGrads, AdaptError> {
    let c = cosines(batch)?;
    let (n, d, tau) = (batch.n, batch.dim, batch.tau);
    let (sp, sn) = softmax_rows(&c, n, tau);
    let loss = (0..n).map(|i| row_loss(&c, n, i, tau)).sum::<f64>() / n as f64;

    let mut ga = vec![0.0; n * d];
    let mut gp = vec![0.0; n * d];
    let mut gn = vec![0.0; n * d];
    let inv = 1.0 / (n as f64 * tau);
    for i in 0..n {
        let a = batch.anchor(i);
        let na = c.anchor_norms[i];
        for j in 0..n {
            let (p, np) = (batch.positive(j), c.pos_norms[j]);
            let (q, nq) = (batch.negative(j), c.neg_norms[j]);
            // dL/dcos⁺_ij and dL/dcos⁻_ij
            let wp = inv * (sp[i * n + j] - if i == j { 1.0 } else { 0.0 });
            let wn = inv * sn[i * n + j];
            let cp = c.pos[i * n + j];
            let cn = c.neg[i * n + j];
            add_cos_grad(&mut ga[i * d..(i + 1) * d], a, p, na, np, cp, wp);
            add_cos_grad(&mut ga[i * d..(i + 1) * d], a, q, na, nq, cn, wn);
            add_cos_grad(&mut gp[j * d..(j + 1) * d], p, a, np, na, cp, wp);
            add_cos_grad(&mut gn[j * d..(j + 1) * d], q, a, nq, na, cn, wn);
        }
    }
    Ok(EmbeddingGrads {
        loss,
        anchors: ga,
        positives: gp,
        negatives: gn,
    })
}

/// Token ids, pooled vectors, and embeddings for the three roles of a batch.
struct Forward {
    ids: Vec<Vec<usize>>,
    pooled: Vec<Vec<f64>>,
}

fn forward(enc: &ToyEncoder, texts: &[&str]) -> (Forward, Vec<f64>) {
    let ids: Vec<Vec<usize>> = texts.iter().map(|t| enc.vocab.ids(t)).collect();
    let pooled: Vec<Vec<f64>> = ids.iter().map(|i| enc.pool(i)).collect();
    let emb = pooled.iter().flat_map(|u| enc.project(u)).collect();
    (Forward { ids, pooled }, emb)
}

pub fn encode_batch(enc: &ToyEncoder, triplets: &[NliTriplet], tau: f64) -> Result<LossBatch, AdaptError> {
    let role = |f: fn(&NliTriplet) -> &str| -> Vec<f64> {
        triplets.iter().flat_map(|t| enc.encode(f(t))).collect()
    };
    let batch = LossBatch {
        anchors: role(|t| &t.anchor),
        positives: role(|t| &t.positive),
        negatives: role(|t| &t.negative),
        n: triplets.len(),
        dim: enc.dim,
        tau,
    };
    batch.check()?;
    Ok(batch)
}

pub fn batch_loss(enc: &ToyEncoder, triplets: &[NliTriplet], tau: f64) -> Result<f64, AdaptError> {
    super::loss::info_nce_loss(&encode_batch(enc, triplets, tau)?)
}

/// Loss and analytic parameter gradients for one batch of triplets.
pub fn loss_gradient(
    enc: &ToyEncoder,
    triplets: &[NliTriplet],
    tau: f64,
) -> Result<(f64, Gradients), AdaptError> {
    if triplets.is_empty() {
        return Err(AdaptError::BatchShape);
    }
    let d = enc.dim;
    let mut texts: Vec<&str> = Vec::with_capacity(3 * triplets.len());
    texts.extend(triplets.iter().map(|t| t.anchor.as_str()));
    texts.extend(triplets.iter().map(|t| t.positive.as_str()));
    texts.extend(triplets.iter().map(|t| t.negative.as_str()));
    let (fwd, emb) = forward(enc, &texts);
    let n = triplets.len();
    let batch = LossBatch {
        anchors: emb[..n * d].to_vec(),
        positives: emb[n * d..2 * n * d].to_vec(),
        negatives: emb[2 * n * d..].to_vec(),
        n,
        dim: d,
        tau,
    };
    let eg = loss_embedding_grads(&batch)?;
    let grad_emb: Vec<&[f64]> = eg
        .anchors
        .chunks_exact(d)
        .chain(eg.positives.chunks_exact(d))
        .chain(eg.negatives.chunks_exact(d))
        .collect();

    let mut g = Gradients {
        token_table: vec![0.0; enc.token_table.len()],
        projection: vec![0.0; d * d],
    };
    for (t, ge) in grad_emb.iter().enumerate() {
        let u = &fwd.pooled[t];
        // embedding = P·u  ⇒  dP += ge ⊗ u,  du = Pᵀ·ge
        let mut du = vec![0.0; d];
        for r in 0..d {
            let prow = &enc.projection[r * d..(r + 1) * d];
            for c in 0..d {
                g.projection[r * d + c] += ge[r] * u[c];
                du[c] += prow[c] * ge[r];
            }
        }
        let share = 1.0 / fwd.ids[t].len() as f64;
        for &id in &fwd.ids[t] {
            let row = &mut g.token_table[id * d..(id + 1) * d];
            for c in 0..d {
                row[c] += share * du[c];
            }
        }
    }
    Ok((eg.loss, g))
}
