//! Caption scoring over spatial objects and temporal events.
//!
//! For one video and one aspect, elements are extracted from the ground-truth
//! aspect caption (spatial for objects, temporal for events) and from the
//! predicted caption. Then
//!
//! * precision = predicted elements entailed by the ground-truth aspect
//!   caption, over the number of predicted elements;
//! * recall = ground-truth elements entailed by the predicted caption, over
//!   the number of ground-truth elements;
//! * F1 = harmonic mean of the two.
//!
//! Videos whose ground-truth caption yields no elements are skipped for that
//! aspect and listed in the report instead of being scored as zero.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CaptionSet, CorpusEntry, PredictionEntry};
use crate::judge::{map_ordered, templates, Aspect, Element, Judge, JudgeError};

pub const DENOMINATOR_NOTE: &str = "precision is normalized by the number of predicted elements and recall by the number of ground-truth elements";

#[derive(Debug, Error)]
pub enum CapstError {
    #[error("video \"{video_id}\": {source}")]
    Judge {
        video_id: String,
        #[source]
        source: JudgeError,
    },
    #[error("no scored videos to aggregate")]
    Empty,
    #[error("video \"{0}\" is not in the corpus")]
    UnknownVideo(String),
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoCapstScore {
    pub video_id: String,
    pub aspect: Aspect,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_pred_elements: usize,
    pub n_gt_elements: usize,
    pub n_pred_entailed: usize,
    pub n_gt_entailed: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub video_id: String,
    pub aspect: Aspect,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum VideoOutcome {
    Scored(VideoCapstScore),
    Skipped(Skipped),
}

fn aspect_caption(gt: &CaptionSet, aspect: Aspect) -> &str {
    match aspect {
        Aspect::Object => &gt.spatial,
        Aspect::Event => &gt.temporal,
    }
}

fn count_entailed(judge: &Judge, description: &str, elements: &[Element]) -> Result<usize, JudgeError> {
    let mut n = 0;
    for e in elements {
        if judge.judge_entailment(description, e)?.entailed {
            n += 1;
        }
    }
    Ok(n)
}

/// Score one prediction against one ground-truth caption set.
pub fn score_video(
    judge: &Judge,
    gt: &CaptionSet,
    pred: &PredictionEntry,
    aspect: Aspect,
) -> Result<VideoOutcome, CapstError> {
    let wrap = |source| CapstError::Judge {
        video_id: pred.id.clone(),
        source,
    };
    let gt_text = aspect_caption(gt, aspect);
    if gt_text.trim().is_empty() {
        return Ok(VideoOutcome::Skipped(Skipped {
            video_id: pred.id.clone(),
            aspect,
            reason: format!("empty ground-truth {} caption", aspect_caption_name(aspect)),
        }));
    }
    let gt_ex = judge.extract_elements(gt_text, aspect).map_err(wrap)?;
    if gt_ex.elements.is_empty() {
        return Ok(VideoOutcome::Skipped(Skipped {
            video_id: pred.id.clone(),
            aspect,
            reason: "no ground-truth elements extracted".into(),
        }));
    }
    let (pred_elements, pred_truncated) = if pred.caption.trim().is_empty() {
        (Vec::new(), false)
    } else {
        let ex = judge.extract_elements(&pred.caption, aspect).map_err(wrap)?;
        (ex.elements, ex.truncated)
    };
    let truncated = gt_ex.truncated || pred_truncated;
    finish(judge, pred, aspect, gt_text, gt_ex.elements, pred_elements, truncated).map_err(wrap)
}

fn aspect_caption_name(aspect: Aspect) -> &'static str {
    match aspect {
        Aspect::Object => "spatial",
        Aspect::Event => "temporal",
    }
}

fn finish(
    judge: &Judge,
    pred: &PredictionEntry,
    aspect: Aspect,
    gt_text: &str,
    gt_elements: Vec<Element>,
    pred_elements: Vec<Element>,
    truncated: bool,
) -> Result<VideoOutcome, JudgeError> {
    let n_pred_entailed = count_entailed(judge, gt_text, &pred_elements)?;
    let n_gt_entailed = if pred.caption.trim().is_empty() {
        0
    } else {
        count_entailed(judge, &pred.caption, &gt_elements)?
    };
    let precision = if pred_elements.is_empty() {
        0.0
    } else {
        n_pred_entailed as f64 / pred_elements.len() as f64
    };
    let recall = n_gt_entailed as f64 / gt_elements.len() as f64;
    Ok(VideoOutcome::Scored(VideoCapstScore {
        video_id: pred.id.clone(),
        aspect,
        precision,
        recall,
        f1: f1(precision, recall),
        n_pred_elements: pred_elements.len(),
        n_gt_elements: gt_elements.len(),
        n_pred_entailed,
        n_gt_entailed,
        truncated,
    }))
}

/// Mean F1, recall, and precision (all fractions) over a set of videos.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub f1: f64,
    pub recall: f64,
    pub precision: f64,
    pub videos: usize,
}

impl Prf {
    fn mean_of(scores: &[&VideoCapstScore]) -> Option<Self> {
        if scores.is_empty() {
            return None;
        }
        let n = scores.len() as f64;
        let sum = |f: fn(&VideoCapstScore) -> f64| scores.iter().map(|s| f(s)).sum::<f64>() / n;
        Some(Self {
            f1: sum(|s| s.f1),
            recall: sum(|s| s.recall),
            precision: sum(|s| s.precision),
            videos: scores.len(),
        })
    }
}

/// Table layout: "action" is the event aspect, "object" the object aspect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectPair {
    pub action: Option<Prf>,
    pub object: Option<Prf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapstReport {
    pub per_category: BTreeMap<String, AspectPair>,
    pub overall: AspectPair,
    pub judged_videos: usize,
    pub skipped: Vec<Skipped>,
    pub truncated: Vec<String>,
    pub scores: Vec<VideoCapstScore>,
}

/// Per-category and overall means, macro-averaged over videos. Overall
/// values pool every scored video rather than averaging category means.
pub fn aggregate(outcomes: &[VideoOutcome], corpus: &[CorpusEntry]) -> Result<CapstReport, CapstError> {
    let category: HashMap<&str, &str> = corpus
        .iter()
        .map(|e| (e.id.as_str(), e.category.as_str()))
        .collect();

    let mut scores: Vec<VideoCapstScore> = Vec::new();
    let mut skipped: Vec<Skipped> = Vec::new();
    for o in outcomes {
        let id = match o {
            VideoOutcome::Scored(s) => &s.video_id,
            VideoOutcome::Skipped(s) => &s.video_id,
        };
        if !category.contains_key(id.as_str()) {
            return Err(CapstError::UnknownVideo(id.clone()));
        }
        match o {
            VideoOutcome::Scored(s) => scores.push(s.clone()),
            VideoOutcome::Skipped(s) => skipped.push(s.clone()),
        }
    }
    if scores.is_empty() {
        return Err(CapstError::Empty);
    }
    scores.sort_by(|a, b| (&a.video_id, a.aspect).cmp(&(&b.video_id, b.aspect)));
    skipped.sort_by(|a, b| (&a.video_id, a.aspect).cmp(&(&b.video_id, b.aspect)));

    let pair = |filter: &dyn Fn(&VideoCapstScore) -> bool| {
        let pick = |aspect| {
            let sel: Vec<&VideoCapstScore> = scores
                .iter()
                .filter(|s| s.aspect == aspect && filter(s))
                .collect();
            Prf::mean_of(&sel)
        };
        AspectPair {
            action: pick(Aspect::Event),
            object: pick(Aspect::Object),
        }
    };

    let mut categories: Vec<&str> = scores.iter().map(|s| category[s.video_id.as_str()]).collect();
    categories.sort_unstable();
    categories.dedup();
    let per_category = categories
        .into_iter()
        .map(|c| {
            (
                c.to_string(),
                pair(&|s: &VideoCapstScore| category[s.video_id.as_str()] == c),
            )
        })
        .collect();

    let mut judged: Vec<&str> = scores.iter().map(|s| s.video_id.as_str()).collect();
    judged.dedup();
    let mut truncated: Vec<String> = scores
        .iter()
        .filter(|s| s.truncated)
        .map(|s| format!("{}:{}", s.video_id, s.aspect))
        .collect();
    truncated.dedup();

    Ok(CapstReport {
        per_category,
        overall: pair(&|_| true),
        judged_videos: judged.len(),
        skipped,
        truncated,
        scores,
    })
}

/// Score every prediction for the requested aspects. Corpus entries without
/// a prediction are listed as skipped. Tasks run concurrently, bounded by the
/// judge's `max_in_flight`; results are returned in (video id, aspect) order.
pub fn evaluate_captions(
    judge: &Judge,
    corpus: &[CorpusEntry],
    predictions: &[PredictionEntry],
    aspects: &[Aspect],
) -> Result<Vec<VideoOutcome>, CapstError> {
    let by_id: HashMap<&str, &PredictionEntry> =
        predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut entries: Vec<&CorpusEntry> = corpus.iter().collect();
    entries.sort_by(|a, b| a.id.cmp(&b.id));

    let mut tasks = Vec::new();
    let mut missing = Vec::new();
    for e in entries {
        for &aspect in aspects {
            match by_id.get(e.id.as_str()) {
                Some(p) => tasks.push((e, *p, aspect)),
                None => missing.push(VideoOutcome::Skipped(Skipped {
                    video_id: e.id.clone(),
                    aspect,
                    reason: "no prediction".into(),
                })),
            }
        }
    }
    let results = map_ordered(&tasks, judge.config().max_in_flight, |(e, p, aspect)| {
        score_video(judge, &e.captions, p, *aspect)
    });
    let mut out = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    out.extend(missing);
    out.sort_by(|a, b| outcome_key(a).cmp(&outcome_key(b)));
    Ok(out)
}

fn outcome_key(o: &VideoOutcome) -> (&str, Aspect) {
    match o {
        VideoOutcome::Scored(s) => (&s.video_id, s.aspect),
        VideoOutcome::Skipped(s) => (&s.video_id, s.aspect),
    }
}

/// Provenance recorded with every caption report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapstProvenance {
    pub judge_model: String,
    pub template_ids: Vec<String>,
    pub element_cap: usize,
    pub denominators: String,
}

pub fn provenance(judge: &Judge) -> CapstProvenance {
    CapstProvenance {
        judge_model: judge.model_name().to_string(),
        template_ids: vec![
            templates::EXTRACT_OBJECT_ID.into(),
            templates::EXTRACT_EVENT_ID.into(),
            templates::ENTAIL_ID.into(),
        ],
        element_cap: judge.config().element_cap,
        denominators: DENOMINATOR_NOTE.into(),
    }
}
