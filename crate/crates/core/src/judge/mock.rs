//! Offline rule-based judge.
//!
//! Tokens are lowercased, apostrophes dropped, and the text split on every
//! non-alphanumeric character. A token is normalized by removing one
//! trailing `ing`, `ed`, or `s` (checked in that order, never leaving a stem
//! shorter than three characters, and never stripping the `s` of `ss`).
//!
//! * Entailment: an element is entailed when every non-stopword token of the
//!   element, normalized, occurs among the normalized description tokens.
//! * Event extraction: one element per sentence (or `, then` clause) that
//!   contains a known action verb.
//! * Object extraction: one element per sentence; a sentence with an
//!   attribute marker (`wearing`, `with`, ...) followed by a list joined with
//!   `and` or commas yields one element per list item, each repeating the
//!   text up to the marker.

use std::collections::HashSet;
use std::sync::OnceLock;

use super::Aspect;

pub const MOCK_MODEL_NAME: &str = "mock-judge/v1";

const STOPWORDS_V1: &str = include_str!("../../data/stopwords-v1.txt");
const EVENT_VERBS_V1: &str = include_str!("../../data/event-verbs-v1.txt");

const ATTRIBUTE_MARKERS: [&str; 6] = ["wearing", "with", "holding", "carrying", "has", "having"];
const LEADING_CONNECTIVES: [&str; 10] = [
    "and then",
    "after that",
    "then",
    "first",
    "next",
    "finally",
    "afterwards",
    "subsequently",
    "later",
    "and",
];

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| data_lines(STOPWORDS_V1).collect())
}

fn event_verbs() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| {
        data_lines(EVENT_VERBS_V1)
            .flat_map(str::split_whitespace)
            .map(normalize)
            .collect()
    })
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .replace(['\'', '\u{2019}'], "")
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

pub fn normalize(token: &str) -> String {
    for suffix in ["ing", "ed"] {
        if let Some(stem) = token.strip_suffix(suffix) {
            if stem.chars().count() >= 3 {
                return stem.to_owned();
            }
        }
    }
    if let Some(stem) = token.strip_suffix('s') {
        if stem.chars().count() >= 3 && !stem.ends_with('s') {
            return stem.to_owned();
        }
    }
    token.to_owned()
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().contains(token)
}

/// Normalized content tokens of `text`.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .map(|t| normalize(&t))
        .collect()
}

pub fn entails(description: &str, element: &str) -> bool {
    let have: HashSet<String> = tokenize(description).iter().map(|t| normalize(t)).collect();
    content_tokens(element).iter().all(|t| have.contains(t))
}

fn sentences(text: &str) -> Vec<String> {
    text.split(['.', '!', '?', ';', '\n'])
        .flat_map(|s| {
            let lower = s.to_lowercase();
            lower
                .split(", and then ")
                .flat_map(|p| p.split(", then "))
                .flat_map(|p| p.split(" and then "))
                .map(str::to_owned)
                .collect::<Vec<_>>()
        })
        .map(|s| strip_connectives(&collapse_ws(&s)))
        .filter(|s| !s.is_empty())
        .collect()
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn strip_connectives(s: &str) -> String {
    let mut s = s.trim().trim_matches(',').trim().to_owned();
    loop {
        let before = s.len();
        for c in LEADING_CONNECTIVES {
            if let Some(rest) = s.strip_prefix(c) {
                if rest.is_empty() || rest.starts_with([' ', ',']) {
                    s = rest.trim_start_matches([' ', ',']).to_owned();
                    break;
                }
            }
        }
        if s.len() == before {
            return s.trim_end_matches(',').trim().to_owned();
        }
    }
}

fn has_verb(sentence: &str) -> bool {
    tokenize(sentence)
        .iter()
        .any(|t| !is_stopword(t) && event_verbs().contains(&normalize(t)))
}

fn split_attributes(sentence: &str) -> Vec<String> {
    let words: Vec<&str> = sentence.split(' ').collect();
    let Some(marker) = words
        .iter()
        .position(|w| ATTRIBUTE_MARKERS.contains(&w.trim_matches(',')))
    else {
        return vec![sentence.to_owned()];
    };
    let prefix = words[..=marker].join(" ");
    let rest = words[marker + 1..].join(" ");
    let parts: Vec<String> = rest
        .split(", and ")
        .flat_map(|p| p.split(" and "))
        .flat_map(|p| p.split(", "))
        .map(|p| p.trim().trim_matches(',').trim().to_owned())
        .filter(|p| !p.is_empty())
        .collect();
    if parts.len() < 2 {
        return vec![sentence.to_owned()];
    }
    parts.into_iter().map(|p| format!("{prefix} {p}")).collect()
}

pub fn extract(caption: &str, aspect: Aspect) -> Vec<String> {
    let kept = sentences(caption)
        .into_iter()
        .filter(|s| !content_tokens(s).is_empty());
    match aspect {
        Aspect::Event => kept.filter(|s| has_verb(s)).collect(),
        Aspect::Object => kept.flat_map(|s| split_attributes(&s)).collect(),
    }
}
