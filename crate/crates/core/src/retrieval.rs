//! Recall@K for text↔video retrieval, spatiotemporal retrieval bias, and the
//! unified retrieval/caption score.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed_store::{similarity_matrix, EmbedError, EmbeddingMatrix, SimilarityMatrix};

pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Error)]
pub enum MetricError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("text and video matrices do not share the same id set ({0})")]
    IdSetMismatch(String),
    #[error("K={k} exceeds gallery size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("K values must be positive and strictly ascending")]
    BadKs,
    #[error("{split} table lacks R@{k} for {direction}")]
    MissingRecall {
        split: Split,
        direction: &'static str,
        k: usize,
    },
    #[error("mean {0} recall is zero; bias is undefined")]
    ZeroMeanRecall(Split),
    #[error("expected {expected} recall values, got {actual}")]
    RecallCount { expected: usize, actual: usize },
    #[error("recall {0} is outside [0, 100]")]
    RecallRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    General,
    Spatial,
    Temporal,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::General => "general",
            Split::Spatial => "spatial",
            Split::Temporal => "temporal",
        })
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "general" => Ok(Split::General),
            "spatial" => Ok(Split::Spatial),
            "temporal" => Ok(Split::Temporal),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// Recall percentages keyed by K, for both retrieval directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallTable {
    pub split: Split,
    pub t2v: BTreeMap<usize, f64>,
    pub v2t: BTreeMap<usize, f64>,
}

impl RecallTable {
    /// Table from the conventional R@1/5/10 layout:
    /// `[t2v_r1, t2v_r5, t2v_r10, v2t_r1, v2t_r5, v2t_r10]`.
    pub fn from_r1_r5_r10(split: Split, values: &[f64]) -> Result<Self, MetricError> {
        if values.len() != 6 {
            return Err(MetricError::RecallCount {
                expected: 6,
                actual: values.len(),
            });
        }
        if let Some(&bad) = values.iter().find(|v| !(0.0..=100.0).contains(*v)) {
            return Err(MetricError::RecallRange(bad));
        }
        let map = |s: &[f64]| DEFAULT_KS.iter().copied().zip(s.iter().copied()).collect();
        Ok(Self {
            split,
            t2v: map(&values[..3]),
            v2t: map(&values[3..]),
        })
    }

    /// The six R@1/5/10 values, text-to-video first.
    pub fn standard_values(&self) -> Result<[f64; 6], MetricError> {
        let mut out = [0.0; 6];
        for (d, (name, map)) in [("t2v", &self.t2v), ("v2t", &self.v2t)].iter().enumerate() {
            for (i, k) in DEFAULT_KS.iter().enumerate() {
                out[d * 3 + i] = *map.get(k).ok_or(MetricError::MissingRecall {
                    split: self.split,
                    direction: name,
                    k: *k,
                })?;
            }
        }
        Ok(out)
    }
}

/// 1-based rank of `target` among `scores` sorted descending, ties broken by
/// ascending index.
pub fn rank_of(scores: &[f64], target: usize) -> usize {
    let t = scores[target];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| s > t || (s == t && j < target))
        .count()
}

fn recall_at(sim: &SimilarityMatrix, pair_of: &[usize], ks: &[usize]) -> BTreeMap<usize, f64> {
    let ranks: Vec<usize> = pair_of
        .iter()
        .enumerate()
        .map(|(i, &p)| rank_of(sim.row(i), p))
        .collect();
    let n = ranks.len() as f64;
    ks.iter()
        .map(|&k| {
            let hits = ranks.iter().filter(|&&r| r <= k).count();
            (k, 100.0 * hits as f64 / n)
        })
        .collect()
}

fn pairing(from: &[String], to: &[String]) -> Result<Vec<usize>, MetricError> {
    let index: HashMap<&str, usize> = to.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    from.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| MetricError::IdSetMismatch(format!("\"{id}\" has no partner")))
        })
        .collect()
}

/// Evaluate both retrieval directions. Texts and videos are paired by id,
/// not by row position.
pub fn eval_retrieval(
    split: Split,
    text_emb: &EmbeddingMatrix,
    video_emb: &EmbeddingMatrix,
    ks: &[usize],
) -> Result<RecallTable, MetricError> {
    if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MetricError::BadKs);
    }
    if text_emb.rows() != video_emb.rows() {
        return Err(MetricError::IdSetMismatch(format!(
            "{} texts vs {} videos",
            text_emb.rows(),
            video_emb.rows()
        )));
    }
    let n = text_emb.rows();
    if let Some(&k) = ks.iter().find(|&&k| k > n) {
        return Err(MetricError::KTooLarge { k, n });
    }
    let t2v_pair = pairing(text_emb.ids(), video_emb.ids())?;
    let v2t_pair = pairing(video_emb.ids(), text_emb.ids())?;

    let sim = similarity_matrix(text_emb, video_emb)?;
    let t2v = recall_at(&sim, &t2v_pair, ks);
    let v2t = recall_at(&sim.transpose(), &v2t_pair, ks);
    Ok(RecallTable { split, t2v, v2t })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasOrientation {
    /// `|mean_spatial / mean_temporal - 1|`, which reproduces the published
    /// leaderboard values.
    #[default]
    Table3Compatible,
    /// `|1 - mean_temporal / mean_spatial|`, the formula as typeset.
    Eq1Literal,
}

impl BiasOrientation {
    pub fn provenance(self) -> &'static str {
        match self {
            BiasOrientation::Table3Compatible => {
                "bias = 100*|mean_spatial/mean_temporal - 1| (leaderboard-compatible orientation; \
                 the typeset formula 100*|1 - mean_temporal/mean_spatial| does not reproduce the \
                 published ReBias column and is available as eq1_literal)"
            }
            BiasOrientation::Eq1Literal => {
                "bias = 100*|1 - mean_temporal/mean_spatial| (typeset orientation; published \
                 ReBias values follow table3_compatible instead)"
            }
        }
    }
}

impl FromStr for BiasOrientation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table3_compatible" => Ok(Self::Table3Compatible),
            "eq1_literal" => Ok(Self::Eq1Literal),
            other => Err(format!("unknown orientation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReBiasScore {
    pub mean_spatial: f64,
    pub mean_temporal: f64,
    pub bias_percent: f64,
    pub orientation: BiasOrientation,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Retrieval bias between the spatial and temporal splits. Each split's mean
/// is taken over all six R@{1,5,10} values of both directions.
pub fn rebias(
    spatial: &RecallTable,
    temporal: &RecallTable,
    orientation: BiasOrientation,
) -> Result<ReBiasScore, MetricError> {
    let mean_spatial = mean(&spatial.standard_values()?);
    let mean_temporal = mean(&temporal.standard_values()?);
    let bias_percent = if mean_spatial == mean_temporal {
        0.0
    } else {
        match orientation {
            BiasOrientation::Table3Compatible => {
                if mean_temporal == 0.0 {
                    return Err(MetricError::ZeroMeanRecall(Split::Temporal));
                }
                100.0 * (mean_spatial / mean_temporal - 1.0).abs()
            }
            BiasOrientation::Eq1Literal => {
                if mean_spatial == 0.0 {
                    return Err(MetricError::ZeroMeanRecall(Split::Spatial));
                }
                100.0 * (1.0 - mean_temporal / mean_spatial).abs()
            }
        }
    };
    Ok(ReBiasScore {
        mean_spatial,
        mean_temporal,
        bias_percent,
        orientation,
    })
}

/// Mean of average R@1 and average F1, both in percent.
pub fn unified_score(avg_r1: f64, avg_f1: f64) -> f64 {
    (avg_r1 + avg_f1) / 2.0
}
