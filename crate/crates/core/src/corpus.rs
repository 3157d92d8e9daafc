//! Annotated corpus records, prediction files, and structural validation.
//!
//! Both file kinds are newline-delimited JSON. A corpus line looks like
//!
//! ```text
//! {"id":"v1","video_uri":"videos/v1.mp4","duration_s":12.5,"category":"household activities",
//!  "subcategory":"cutting fruit","captions":{"general":"...","spatial":"...","temporal":"..."}}
//! ```
//!
//! and a prediction line is `{"id":"v1","caption":"..."}`.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The four major categories videos are drawn from.
pub const MAJOR_CATEGORIES: [&str; 4] = [
    "personal care",
    "socializing & relaxing",
    "sports & exercise",
    "household activities",
];

/// Recommended word range for a general caption (inclusive).
pub const GENERAL_WORDS_MIN: usize = 150;
pub const GENERAL_WORDS_MAX: usize = 300;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: String },
    #[error("line {line}: duplicate id \"{id}\"")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: prediction id \"{id}\" is not in the corpus")]
    UnknownPredictionId { line: usize, id: String },
    #[error("corpus is empty")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionSet {
    pub general: String,
    pub spatial: String,
    pub temporal: String,
}

impl CaptionSet {
    pub fn fields(&self) -> [(&'static str, &str); 3] {
        [
            ("general", &self.general),
            ("spatial", &self.spatial),
            ("temporal", &self.temporal),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub video_uri: String,
    pub duration_s: f64,
    pub category: String,
    pub subcategory: String,
    pub captions: CaptionSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub id: String,
    pub caption: String,
}

/// Number of maximal non-whitespace runs in `text`.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

// Field names checked in order so the error names the first absent one.
const ENTRY_FIELDS: [&str; 6] = [
    "id",
    "video_uri",
    "duration_s",
    "category",
    "subcategory",
    "captions",
];
const CAPTION_FIELDS: [&str; 3] = ["general", "spatial", "temporal"];

fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Iterate non-blank lines with 1-based line numbers.
fn records(
    path: &Path,
) -> Result<impl Iterator<Item = Result<(usize, String), CorpusError>>, CorpusError> {
    let reader = open(path)?;
    let path = path.to_path_buf();
    Ok(reader
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| match line {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(Ok((i + 1, l))),
            Err(source) => Some(Err(CorpusError::Io {
                path: path.clone(),
                source,
            })),
        }))
}

fn parse_entry(line_no: usize, line: &str) -> Result<CorpusEntry, CorpusError> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
    let obj = value.as_object().ok_or_else(|| CorpusError::Malformed {
        line: line_no,
        message: "record is not a JSON object".into(),
    })?;
    for field in ENTRY_FIELDS {
        if !obj.contains_key(field) {
            return Err(CorpusError::MissingField {
                line: line_no,
                field: field.into(),
            });
        }
    }
    if let Some(captions) = obj["captions"].as_object() {
        for field in CAPTION_FIELDS {
            if !captions.contains_key(field) {
                return Err(CorpusError::MissingField {
                    line: line_no,
                    field: format!("captions.{field}"),
                });
            }
        }
    }
    serde_json::from_value(value).map_err(|e| CorpusError::Malformed {
        line: line_no,
        message: e.to_string(),
    })
}

/// Load a corpus file, preserving record order and rejecting duplicate ids.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusEntry>, CorpusError> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for record in records(path.as_ref())? {
        let (line_no, line) = record?;
        let entry = parse_entry(line_no, &line)?;
        if !seen.insert(entry.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: entry.id,
            });
        }
        entries.push(entry);
    }
    Ok(entries)
}

/// Serialize entries in the corpus line format.
pub fn write_corpus(path: impl AsRef<Path>, entries: &[CorpusEntry]) -> Result<(), CorpusError> {
    write_lines(path.as_ref(), entries)
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    for item in items {
        let line = serde_json::to_string(item).expect("record serializes");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Load a prediction file. When `corpus` is given, every id must resolve
/// against it.
pub fn load_predictions(
    path: impl AsRef<Path>,
    corpus: Option<&[CorpusEntry]>,
) -> Result<Vec<PredictionEntry>, CorpusError> {
    let known: Option<HashSet<&str>> = corpus.map(|c| c.iter().map(|e| e.id.as_str()).collect());
    let mut seen = HashSet::new();
    let mut preds = Vec::new();
    for record in records(path.as_ref())? {
        let (line_no, line) = record?;
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        for field in ["id", "caption"] {
            if value.get(field).is_none() {
                return Err(CorpusError::MissingField {
                    line: line_no,
                    field: field.into(),
                });
            }
        }
        let pred: PredictionEntry =
            serde_json::from_value(value).map_err(|e| CorpusError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        if let Some(known) = &known {
            if !known.contains(pred.id.as_str()) {
                return Err(CorpusError::UnknownPredictionId {
                    line: line_no,
                    id: pred.id,
                });
            }
        }
        if !seen.insert(pred.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: pred.id,
            });
        }
        preds.push(pred);
    }
    Ok(preds)
}

pub fn write_predictions(
    path: impl AsRef<Path>,
    preds: &[PredictionEntry],
) -> Result<(), CorpusError> {
    write_lines(path.as_ref(), preds)
}

/// Validation finding codes. Errors make a corpus unusable for evaluation;
/// warnings flag entries worth a second look.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Finding {
    /// error: id is empty
    EmptyId,
    /// error: a caption has no words
    EmptyCaption,
    /// error: duration is negative or not finite
    InvalidDuration,
    /// warning: general caption shorter than 150 words
    WordCountLow,
    /// warning: general caption longer than 300 words
    WordCountHigh,
    /// warning: category is not one of the four major categories
    UnknownCategory,
    /// warning: subcategory is empty
    EmptySubcategory,
    /// warning: video_uri is empty
    EmptyVideoUri,
}

impl Finding {
    pub fn code(self) -> &'static str {
        match self {
            Finding::EmptyId => "EMPTY_ID",
            Finding::EmptyCaption => "EMPTY_CAPTION",
            Finding::InvalidDuration => "INVALID_DURATION",
            Finding::WordCountLow => "WORD_COUNT_LOW",
            Finding::WordCountHigh => "WORD_COUNT_HIGH",
            Finding::UnknownCategory => "UNKNOWN_CATEGORY",
            Finding::EmptySubcategory => "EMPTY_SUBCATEGORY",
            Finding::EmptyVideoUri => "EMPTY_VIDEO_URI",
        }
    }

    pub fn is_error(self) -> bool {
        matches!(
            self,
            Finding::EmptyId | Finding::EmptyCaption | Finding::InvalidDuration
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub entry_id: String,
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
    pub word_count_general: usize,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

pub fn validate_entry(entry: &CorpusEntry) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();

    if entry.id.trim().is_empty() {
        errors.push(Finding::EmptyId);
    }
    if !(entry.duration_s.is_finite() && entry.duration_s >= 0.0) {
        errors.push(Finding::InvalidDuration);
    }
    if entry
        .captions
        .fields()
        .iter()
        .any(|(_, text)| word_count(text) == 0)
    {
        errors.push(Finding::EmptyCaption);
    }

    let words = word_count(&entry.captions.general);
    if words > 0 && words < GENERAL_WORDS_MIN {
        warnings.push(Finding::WordCountLow);
    } else if words > GENERAL_WORDS_MAX {
        warnings.push(Finding::WordCountHigh);
    }
    if !MAJOR_CATEGORIES.contains(&normalize_category(&entry.category).as_str()) {
        warnings.push(Finding::UnknownCategory);
    }
    if entry.subcategory.trim().is_empty() {
        warnings.push(Finding::EmptySubcategory);
    }
    if entry.video_uri.trim().is_empty() {
        warnings.push(Finding::EmptyVideoUri);
    }

    ValidationReport {
        entry_id: entry.id.clone(),
        errors,
        warnings,
        word_count_general: words,
    }
}

fn normalize_category(category: &str) -> String {
    category
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
        .replace(" and ", " & ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub count: usize,
    pub mean_words: f64,
    pub mean_duration_s: f64,
    pub per_category: BTreeMap<String, usize>,
}

pub fn corpus_stats(entries: &[CorpusEntry]) -> Result<CorpusStats, CorpusError> {
    if entries.is_empty() {
        return Err(CorpusError::Empty);
    }
    let n = entries.len() as f64;
    let mut per_category = BTreeMap::new();
    let mut words = 0usize;
    let mut duration = 0.0;
    for e in entries {
        words += word_count(&e.captions.general);
        duration += e.duration_s;
        *per_category.entry(e.category.clone()).or_insert(0) += 1;
    }
    Ok(CorpusStats {
        count: entries.len(),
        mean_words: words as f64 / n,
        mean_duration_s: duration / n,
        per_category,
    })
}
