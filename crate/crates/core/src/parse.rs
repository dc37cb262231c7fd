//! Turns free-text model output into typed salience decisions and affect
//! predictions.
//!
//! Canonical schemas:
//!
//! - salience: `{"salient": true}`
//! - final: `{"emotion": "Calm", "arousal": "low", "valence": "positive",
//!   "explanation": "...", "salient_attributes": ["color"]}` where
//!   `salient_attributes` is optional.
//!
//! The first JSON object in the text is tried first; prose around it and
//! code fences are tolerated. When it is missing or incomplete, a keyword
//! rule (salience) or a labeled-line scan (final) fills the gap. Nothing in
//! here panics on arbitrary input: every text yields a value or a
//! [`ParseFailure`].

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::corpus::{AttributeId, Arousal, EmotionVocabulary, Valence};
use crate::metrics::AttrSet;

const EXCERPT_CHARS: usize = 120;
const MAX_JSON_CANDIDATES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParsePath {
    CanonicalJson,
    FallbackKeyword,
    FallbackLabeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureKind {
    NoJsonFound,
    SchemaMismatch,
    UnknownLabel,
    Ambiguous,
    Empty,
}

impl FailureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureKind::NoJsonFound => "NoJsonFound",
            FailureKind::SchemaMismatch => "SchemaMismatch",
            FailureKind::UnknownLabel => "UnknownLabel",
            FailureKind::Ambiguous => "Ambiguous",
            FailureKind::Empty => "Empty",
        }
    }
}

/// A response that could not be turned into a decision. `raw` is the
/// response text exactly as received.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{role}: {} ({detail})", kind.as_str())]
pub struct ParseFailure {
    pub kind: FailureKind,
    pub role: String,
    pub detail: String,
    pub raw: String,
}

impl ParseFailure {
    fn new(kind: FailureKind, role: &str, detail: impl Into<String>, raw: &str) -> Self {
        Self {
            kind,
            role: role.to_string(),
            detail: detail.into(),
            raw: raw.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SalienceDecision {
    pub attribute: AttributeId,
    pub salient: bool,
    pub parse_path: ParsePath,
    pub raw_excerpt: String,
}

impl SalienceDecision {
    /// The canonical response text for this decision.
    pub fn to_canonical_json(&self) -> String {
        serde_json::json!({ "salient": self.salient }).to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldPaths {
    pub emotion: ParsePath,
    pub arousal: ParsePath,
    pub valence: ParsePath,
    pub explanation: ParsePath,
}

impl FieldPaths {
    pub const CANONICAL: FieldPaths = FieldPaths {
        emotion: ParsePath::CanonicalJson,
        arousal: ParsePath::CanonicalJson,
        valence: ParsePath::CanonicalJson,
        explanation: ParsePath::CanonicalJson,
    };
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalPrediction {
    pub emotion: String,
    pub arousal: Arousal,
    pub valence: Valence,
    pub explanation: String,
    /// Attributes the response declares as salient, when it lists any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub salient_attributes: Option<AttrSet>,
    pub paths: FieldPaths,
}

#[derive(Serialize)]
struct CanonicalFinal<'a> {
    emotion: &'a str,
    arousal: Arousal,
    valence: Valence,
    explanation: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    salient_attributes: Option<AttrSet>,
}

impl FinalPrediction {
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(&CanonicalFinal {
            emotion: &self.emotion,
            arousal: self.arousal,
            valence: self.valence,
            explanation: &self.explanation,
            salient_attributes: self.salient_attributes,
        })
        .expect("plain struct serializes")
    }

    /// The labels and explanation as delivered to a reader, used for length
    /// statistics.
    pub fn delivered_text(&self) -> String {
        format!(
            "{} {} {} {}",
            self.emotion,
            self.arousal.as_str(),
            self.valence.as_str(),
            self.explanation
        )
    }
}

/// Canonical label for `raw`: trimmed, case-folded, surrounding punctuation
/// stripped, then matched exactly against labels and aliases.
pub fn normalize_emotion(raw: &str, vocab: &EmotionVocabulary) -> Option<String> {
    vocab.resolve(raw).map(str::to_string)
}

fn excerpt(text: &str) -> String {
    text.trim().chars().take(EXCERPT_CHARS).collect()
}

/// Byte ranges of balanced `{...}` spans, scanning from each opening brace
/// and honoring JSON string escapes inside the span.
fn balanced_spans(text: &str) -> impl Iterator<Item = (usize, usize)> + '_ {
    let bytes = text.as_bytes();
    bytes
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == b'{')
        .take(MAX_JSON_CANDIDATES)
        .filter_map(move |(start, _)| {
            let (mut depth, mut in_str, mut esc) = (0usize, false, false);
            for (i, &b) in bytes.iter().enumerate().skip(start) {
                if in_str {
                    match (esc, b) {
                        (true, _) => esc = false,
                        (false, b'\\') => esc = true,
                        (false, b'"') => in_str = false,
                        _ => {}
                    }
                    continue;
                }
                match b {
                    b'"' => in_str = true,
                    b'{' => depth += 1,
                    b'}' => {
                        depth -= 1;
                        if depth == 0 {
                            return Some((start, i + 1));
                        }
                    }
                    _ => {}
                }
            }
            None
        })
}

/// The first balanced span that parses as a JSON object.
pub fn first_json_object(text: &str) -> Option<Map<String, Value>> {
    balanced_spans(text).find_map(|(s, e)| match serde_json::from_str::<Value>(&text[s..e]) {
        Ok(Value::Object(m)) => Some(m),
        _ => None,
    })
}

fn get_ci<'a>(obj: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    obj.get(key)
        .or_else(|| obj.iter().find(|(k, _)| k.eq_ignore_ascii_case(key)).map(|(_, v)| v))
}

fn words(text: &str, n: usize) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .take(n)
        .map(str::to_lowercase)
        .collect()
}

const LEAD_IN: &[&str] = &["answer", "salience", "decision", "verdict", "response", "final", "json"];

/// Leading-word rule. Opposite cues within the next three words make the
/// answer ambiguous.
fn keyword_salience(text: &str) -> Option<bool> {
    let w = words(text, 12);
    let mut i = 0;
    while i < w.len() && LEAD_IN.contains(&w[i].as_str()) {
        i += 1;
    }
    let first = w.get(i).map(String::as_str);
    let second = w.get(i + 1).map(String::as_str);
    let (value, used) = match (first, second) {
        (Some("yes" | "true"), _) => (true, 1),
        (Some("no" | "false" | "nonsalient"), _) => (false, 1),
        (Some("not" | "non"), Some("salient")) => (false, 2),
        (Some("not"), _) => (false, 1),
        (Some("salient"), Some("yes" | "true")) => (true, 2),
        (Some("salient"), Some("no" | "false" | "not")) => (false, 2),
        (Some("salient"), _) => (true, 1),
        _ => return None,
    };
    let start = (i + used).min(w.len());
    let window = &w[start..(start + 3).min(w.len())];
    let contradicts = window.iter().any(|x| match value {
        true => matches!(x.as_str(), "no" | "false" | "not"),
        false => matches!(x.as_str(), "yes" | "true"),
    });
    (!contradicts).then_some(value)
}

pub fn parse_salience_response(text: &str, attribute: AttributeId) -> Result<SalienceDecision, ParseFailure> {
    let role = format!("attribute:{attribute}");
    if text.trim().is_empty() {
        return Err(ParseFailure::new(FailureKind::Empty, &role, "empty response", text));
    }
    let decision = |salient, parse_path| SalienceDecision {
        attribute,
        salient,
        parse_path,
        raw_excerpt: excerpt(text),
    };
    let obj = first_json_object(text);
    if let Some(obj) = &obj {
        match get_ci(obj, "salient") {
            Some(Value::Bool(b)) => return Ok(decision(*b, ParsePath::CanonicalJson)),
            Some(Value::String(s)) => {
                if let Some(b) = keyword_salience(s) {
                    return Ok(decision(b, ParsePath::FallbackKeyword));
                }
            }
            _ => {}
        }
    }
    if let Some(b) = keyword_salience(text) {
        return Ok(decision(b, ParsePath::FallbackKeyword));
    }
    let (kind, detail) = match obj {
        Some(_) => (FailureKind::SchemaMismatch, "JSON object lacks a boolean \"salient\" field"),
        None => (FailureKind::Ambiguous, "no leading yes/no cue"),
    };
    Err(ParseFailure::new(kind, &role, detail, text))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Emotion,
    Arousal,
    Valence,
    Explanation,
    Attributes,
}

fn label_of(line: &str) -> Option<(Label, &str)> {
    let line = line.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '-' | '#' | '>' | '_'));
    let colon = line.find(':')?;
    let key: String = line[..colon]
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    let label = match key.as_str() {
        "emotion" | "emotion label" | "predicted emotion" => Label::Emotion,
        "arousal" => Label::Arousal,
        "valence" => Label::Valence,
        "explanation" | "rationale" | "reasoning" => Label::Explanation,
        "salient attributes" | "salientattributes" | "salient cues" => Label::Attributes,
        _ => return None,
    };
    let value = line[colon + 1..].trim_matches(|c: char| c.is_whitespace() || c == '*' || c == '_');
    Some((label, value))
}

#[derive(Default)]
struct Labeled {
    emotion: Option<String>,
    arousal: Option<String>,
    valence: Option<String>,
    explanation: Option<String>,
    attributes: Option<String>,
    any_label: bool,
}

fn scan_labeled(text: &str) -> Labeled {
    let mut out = Labeled::default();
    let mut explanation: Vec<&str> = Vec::new();
    let mut loose: Vec<&str> = Vec::new();
    let mut in_explanation = false;
    for line in text.lines() {
        match label_of(line) {
            Some((label, value)) => {
                out.any_label = true;
                in_explanation = label == Label::Explanation;
                let slot = match label {
                    Label::Emotion => &mut out.emotion,
                    Label::Arousal => &mut out.arousal,
                    Label::Valence => &mut out.valence,
                    Label::Attributes => &mut out.attributes,
                    Label::Explanation => {
                        if out.explanation.is_none() && explanation.is_empty() && !value.is_empty() {
                            explanation.push(value);
                        }
                        continue;
                    }
                };
                if slot.is_none() {
                    *slot = Some(value.to_string());
                }
            }
            None => {
                let t = line.trim();
                if t.is_empty() || t.starts_with("```") {
                    continue;
                }
                if in_explanation {
                    explanation.push(t);
                } else {
                    loose.push(t);
                }
            }
        }
    }
    if !explanation.is_empty() {
        out.explanation = Some(explanation.join(" "));
    } else if out.any_label && !loose.is_empty() {
        out.explanation = Some(loose.join(" "));
    }
    out
}

fn first_word(s: &str) -> &str {
    s.split(|c: char| !c.is_alphanumeric()).find(|w| !w.is_empty()).unwrap_or("")
}

fn resolve_emotion_loose(raw: &str, vocab: &EmotionVocabulary) -> Option<String> {
    normalize_emotion(raw, vocab).or_else(|| {
        let head = raw.split(['(', ',', ';', '\n']).next().unwrap_or("");
        normalize_emotion(head, vocab)
    })
}

fn attribute_list(v: &Value) -> Option<AttrSet> {
    match v {
        Value::Array(items) => Some(
            items
                .iter()
                .filter_map(Value::as_str)
                .filter_map(|s| s.parse::<AttributeId>().ok())
                .collect(),
        ),
        Value::String(s) => Some(attribute_text_list(s)),
        _ => None,
    }
}

fn attribute_text_list(s: &str) -> AttrSet {
    s.split([',', ';', '/', '[', ']', '"', '\''])
        .flat_map(|part| part.split(" and "))
        .filter_map(|p| p.parse::<AttributeId>().ok())
        .collect()
}

/// Parses a final-stage (or baseline) response against `vocab`.
pub fn parse_final_response(text: &str, vocab: &EmotionVocabulary) -> Result<FinalPrediction, ParseFailure> {
    parse_final_response_as(text, vocab, "final")
}

/// As [`parse_final_response`], tagging any failure with `role`.
pub fn parse_final_response_as(
    text: &str,
    vocab: &EmotionVocabulary,
    role: &str,
) -> Result<FinalPrediction, ParseFailure> {
    if text.trim().is_empty() {
        return Err(ParseFailure::new(FailureKind::Empty, role, "empty response", text));
    }
    let fail = |kind, detail: String| ParseFailure::new(kind, role, detail, text);
    let obj = first_json_object(text);
    let json_str = |key: &str| -> Option<String> {
        obj.as_ref()
            .and_then(|o| get_ci(o, key))
            .and_then(Value::as_str)
            .map(str::to_string)
    };
    let (j_emo, j_aro, j_val, j_exp) = (
        json_str("emotion"),
        json_str("arousal"),
        json_str("valence"),
        json_str("explanation"),
    );
    let complete = j_emo.is_some() && j_aro.is_some() && j_val.is_some();
    let labeled = if complete { Labeled::default() } else { scan_labeled(text) };

    let pick = |j: Option<String>, l: Option<String>| match (j, l) {
        (Some(v), _) => Some((v, ParsePath::CanonicalJson)),
        (None, Some(v)) => Some((v, ParsePath::FallbackLabeled)),
        (None, None) => None,
    };
    let emo = pick(j_emo, labeled.emotion.clone());
    let aro = pick(j_aro, labeled.arousal.clone());
    let val = pick(j_val, labeled.valence.clone());

    let (Some((emo, emo_p)), Some((aro, aro_p)), Some((val, val_p))) = (emo, aro, val) else {
        if obj.is_none() && !labeled.any_label {
            return Err(fail(
                FailureKind::NoJsonFound,
                "no JSON object and no labeled lines".into(),
            ));
        }
        return Err(fail(
            FailureKind::SchemaMismatch,
            "emotion, arousal and valence are required".into(),
        ));
    };

    let emotion = match emo_p {
        ParsePath::CanonicalJson => normalize_emotion(&emo, vocab),
        _ => resolve_emotion_loose(&emo, vocab),
    }
    .ok_or_else(|| fail(FailureKind::UnknownLabel, format!("unknown emotion \"{emo}\"")))?;
    let arousal_token = match aro_p {
        ParsePath::CanonicalJson => aro.as_str(),
        _ => first_word(&aro),
    };
    let arousal: Arousal = arousal_token
        .parse()
        .map_err(|_| fail(FailureKind::UnknownLabel, format!("arousal \"{aro}\" is not high|low")))?;
    let valence_token = match val_p {
        ParsePath::CanonicalJson => val.as_str(),
        _ => first_word(&val),
    };
    let valence: Valence = valence_token.parse().map_err(|_| {
        fail(
            FailureKind::UnknownLabel,
            format!("valence \"{val}\" is not positive|negative"),
        )
    })?;

    let (explanation, exp_p) = match (j_exp, labeled.explanation) {
        (Some(e), _) => (e, ParsePath::CanonicalJson),
        (None, Some(e)) => (e, ParsePath::FallbackLabeled),
        (None, None) if complete => (String::new(), ParsePath::CanonicalJson),
        (None, None) => (String::new(), ParsePath::FallbackLabeled),
    };

    let salient_attributes = obj
        .as_ref()
        .and_then(|o| get_ci(o, "salient_attributes"))
        .and_then(attribute_list)
        .or_else(|| labeled.attributes.as_deref().map(attribute_text_list));

    Ok(FinalPrediction {
        emotion,
        arousal,
        valence,
        explanation,
        salient_attributes,
        paths: FieldPaths {
            emotion: emo_p,
            arousal: aro_p,
            valence: val_p,
            explanation: exp_p,
        },
    })
}

impl fmt::Display for ParsePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParsePath::CanonicalJson => "canonical_json",
            ParsePath::FallbackKeyword => "fallback_keyword",
            ParsePath::FallbackLabeled => "fallback_labeled",
        })
    }
}
