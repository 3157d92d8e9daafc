//! Versioned judge prompt templates and strict response parsers.
//!
//! Extraction replies are one element per line, each line prefixed with
//! `- `, or the single word `NONE`. Entailment replies are exactly
//! `ENTAILED` or `NOT_ENTAILED` (a JSON object `{"verdict": "..."}` is also
//! accepted).

use super::Aspect;

pub const EXTRACT_OBJECT_ID: &str = "extract-object/v1";
pub const EXTRACT_EVENT_ID: &str = "extract-event/v1";
pub const ENTAIL_ID: &str = "entail/v1";

const EXTRACT_OBJECT: &str = "\
You extract the visual objects described in a video caption.
List every object, person, or scene element the caption mentions. Each line must describe ONE object with at most ONE attribute.
If an object has several attributes, write one line per attribute and repeat the object each time. For example, \"a woman in a red coat and black boots\" becomes two lines: \"a woman in a red coat\" and \"a woman in black boots\".
Do not list actions or events.
Output format: one element per line, each line starting with \"- \". Output nothing else. If the caption mentions no objects, output exactly NONE.

Caption:
{caption}";

const EXTRACT_EVENT: &str = "\
You extract the events described in a video caption.
List every action or event the caption mentions, in the order they happen in the video. Each line must describe ONE event: its subject and a single action.
Do not list static object attributes.
Output format: one event per line, each line starting with \"- \". Output nothing else. If the caption mentions no events, output exactly NONE.

Caption:
{caption}";

const ENTAIL: &str = "\
Decide whether the premise entails the hypothesis: if the premise is true, must the hypothesis also be true?

Premise:
{description}

Hypothesis:
{element}

Answer with exactly one word: ENTAILED or NOT_ENTAILED.";

pub const REPROMPT_EXTRACT: &str = "Your reply did not follow the output format. Reply again with one element per line, each line starting with \"- \", or exactly NONE.";
pub const REPROMPT_ENTAIL: &str = "Your reply was not one of the allowed answers. Reply with exactly one word: ENTAILED or NOT_ENTAILED.";

pub fn extraction_template(aspect: Aspect) -> (&'static str, &'static str) {
    match aspect {
        Aspect::Object => (EXTRACT_OBJECT_ID, EXTRACT_OBJECT),
        Aspect::Event => (EXTRACT_EVENT_ID, EXTRACT_EVENT),
    }
}

pub fn render_extraction(aspect: Aspect, caption: &str) -> (&'static str, String) {
    let (id, template) = extraction_template(aspect);
    (id, template.replacen("{caption}", caption, 1))
}

pub fn render_entailment(description: &str, element: &str) -> (&'static str, String) {
    // Element first so a literal "{element}" inside the description is left alone.
    let prompt = ENTAIL
        .replacen("{element}", element, 1)
        .replacen("{description}", description, 1);
    (ENTAIL_ID, prompt)
}

/// Parse an extraction reply. `None` means the reply broke the format.
pub fn parse_extraction(reply: &str) -> Option<Vec<String>> {
    let body = reply.trim();
    if body.eq_ignore_ascii_case("none") {
        return Some(Vec::new());
    }
    let mut out = Vec::new();
    for line in body.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let item = line.strip_prefix("- ")?.trim().trim_end_matches('.').trim();
        if item.is_empty() {
            return None;
        }
        out.push(item.to_string());
    }
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

pub fn format_extraction(elements: &[String]) -> String {
    if elements.is_empty() {
        "NONE".to_string()
    } else {
        elements
            .iter()
            .map(|e| format!("- {e}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn parse_verdict_word(word: &str) -> Option<bool> {
    let w = word.trim().trim_matches(|c: char| c == '"' || c == '\'' || c == '.' || c == '`');
    match w.to_ascii_uppercase().as_str() {
        "ENTAILED" => Some(true),
        "NOT_ENTAILED" => Some(false),
        _ => None,
    }
}

/// Parse an entailment reply. `None` means the reply is ambiguous.
pub fn parse_entailment(reply: &str) -> Option<bool> {
    let body = reply.trim();
    if body.starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(body).ok()?;
        return match value.get("verdict")? {
            serde_json::Value::String(s) => parse_verdict_word(s),
            serde_json::Value::Bool(b) => Some(*b),
            _ => None,
        };
    }
    parse_verdict_word(body)
}

pub fn format_entailment(entailed: bool) -> &'static str {
    if entailed {
        "ENTAILED"
    } else {
        "NOT_ENTAILED"
    }
}
