use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    consensus_salience, map_labels, AffectLabels, Arousal, ArtworkRecord, AttributeId,
    ConsensusRule, CorpusError, Dataset, EmotionVocabulary, LabelMapping, MappedLabel,
    SalienceAnnotation, Source, Valence,
};

/// Dataset manifest. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    #[serde(default)]
    pub source: Option<String>,
    pub vocabulary: Vec<String>,
    #[serde(default)]
    pub aliases: BTreeMap<String, Vec<String>>,
    pub records: PathBuf,
    #[serde(default)]
    pub salience: Option<PathBuf>,
    #[serde(default)]
    pub mapping: Option<PathBuf>,
    #[serde(default)]
    pub consensus: ConsensusRule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Problems found in one raw record. Empty iff the record is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.to_string(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

const KNOWN_FIELDS: [&str; 9] = [
    "id",
    "image_ref",
    "source",
    "style",
    "content",
    "attribute_descriptions",
    "emotion",
    "arousal",
    "valence",
];

/// Checks one raw record object against the schema and vocabulary.
pub fn validate_record(raw: &Value, vocab: &EmotionVocabulary) -> ValidationReport {
    check_record(raw, vocab, None).0
}

fn required_str<'a>(
    obj: &'a serde_json::Map<String, Value>,
    field: &str,
    report: &mut ValidationReport,
) -> Option<&'a str> {
    match obj.get(field) {
        None | Some(Value::Null) => {
            report.push(field, "missing required field");
            None
        }
        Some(Value::String(s)) if s.trim().is_empty() => {
            report.push(field, "must not be empty");
            None
        }
        Some(Value::String(s)) => Some(s),
        Some(_) => {
            report.push(field, "expected a string");
            None
        }
    }
}

fn optional_str(
    obj: &serde_json::Map<String, Value>,
    field: &str,
    report: &mut ValidationReport,
) -> Option<String> {
    match obj.get(field) {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            report.push(field, "expected a string");
            None
        }
    }
}

pub(crate) fn check_record(
    raw: &Value,
    vocab: &EmotionVocabulary,
    mapping: Option<&LabelMapping>,
) -> (ValidationReport, Option<ArtworkRecord>) {
    let mut report = ValidationReport::default();
    let Some(obj) = raw.as_object() else {
        report.push("record", "expected a JSON object");
        return (report, None);
    };

    let id = required_str(obj, "id", &mut report);
    let image_ref = required_str(obj, "image_ref", &mut report);
    let source = required_str(obj, "source", &mut report).and_then(|s| match s.parse::<Source>() {
        Ok(src) => Some(src),
        Err(()) => {
            report.push(
                "source",
                format!("unknown source \"{s}\" (expected emoart|abstract|artemis|wikiart|other)"),
            );
            None
        }
    });
    let style = optional_str(obj, "style", &mut report);
    let content = optional_str(obj, "content", &mut report);

    let mut attribute_descriptions = BTreeMap::new();
    match obj.get("attribute_descriptions") {
        None | Some(Value::Null) => {}
        Some(Value::Object(map)) => {
            for (k, v) in map {
                match (k.parse::<AttributeId>(), v.as_str()) {
                    (Err(_), _) => report.push(
                        "attribute_descriptions",
                        format!("unknown attribute key \"{k}\""),
                    ),
                    (Ok(_), None) => report.push(
                        "attribute_descriptions",
                        format!("description for \"{k}\" must be a string"),
                    ),
                    (Ok(a), Some(text)) => {
                        attribute_descriptions.insert(a, text.to_string());
                    }
                }
            }
        }
        Some(_) => report.push("attribute_descriptions", "expected an object"),
    }

    let present: Vec<&str> = ["emotion", "arousal", "valence"]
        .into_iter()
        .filter(|f| !matches!(obj.get(*f), None | Some(Value::Null)))
        .collect();
    let mut gold_affect = None;
    let mut unmapped_emotion = None;
    if !present.is_empty() {
        if present.len() < 3 {
            let missing: Vec<&str> = ["emotion", "arousal", "valence"]
                .into_iter()
                .filter(|f| !present.contains(f))
                .collect();
            report.push(
                "affect",
                format!("incomplete affect labels: missing {}", missing.join(", ")),
            );
        }
        let emotion = optional_str(obj, "emotion", &mut report).and_then(|raw| match mapping {
            None => match vocab.resolve(&raw) {
                Some(label) => Some(label.to_string()),
                None => {
                    report.push("emotion", format!("unknown emotion \"{raw}\""));
                    None
                }
            },
            Some(m) => match map_labels(&raw, m) {
                Ok(MappedLabel::Label(l)) => Some(l),
                Ok(MappedLabel::Unmapped) => {
                    unmapped_emotion = Some(raw);
                    None
                }
                Err(_) => {
                    report.push("emotion", format!("external label \"{raw}\" is not in the mapping"));
                    None
                }
            },
        });
        let arousal = optional_str(obj, "arousal", &mut report).and_then(|s| {
            s.parse::<Arousal>()
                .map_err(|()| report.push("arousal", "arousal must be high|low"))
                .ok()
        });
        let valence = optional_str(obj, "valence", &mut report).and_then(|s| {
            s.parse::<Valence>()
                .map_err(|()| report.push("valence", "valence must be positive|negative"))
                .ok()
        });
        if let (Some(emotion), Some(arousal), Some(valence)) = (emotion, arousal, valence) {
            gold_affect = Some(AffectLabels {
                emotion,
                arousal,
                valence,
            });
        }
    }

    if !report.is_valid() {
        return (report, None);
    }
    let extra = obj
        .iter()
        .filter(|(k, _)| !KNOWN_FIELDS.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let record = ArtworkRecord {
        id: id.unwrap_or_default().to_string(),
        image_ref: image_ref.unwrap_or_default().to_string(),
        source: source.unwrap_or(Source::Other),
        style,
        content,
        attribute_descriptions,
        gold_affect,
        unmapped_emotion,
        extra,
    };
    (report, Some(record))
}

fn read(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Non-blank lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

struct Scan {
    issues: Vec<CorpusError>,
    dataset: Option<Dataset>,
}

fn scan(manifest_path: &Path) -> Result<Scan, CorpusError> {
    let text = read(manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| CorpusError::Schema {
        path: manifest_path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let vocab = EmotionVocabulary::new(manifest.vocabulary.clone(), manifest.aliases.clone())?;
    let mapping = manifest
        .mapping
        .as_ref()
        .map(|p| LabelMapping::load(&resolve(base, p), &vocab))
        .transpose()?;

    let mut issues = Vec::new();
    let records_path = resolve(base, &manifest.records);
    let records_text = read(&records_path)?;
    let mut artworks = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, raw_line) in lines(&records_text) {
        let value: Value = match serde_json::from_str(raw_line) {
            Ok(v) => v,
            Err(e) => {
                issues.push(CorpusError::Schema {
                    path: records_path.clone(),
                    line,
                    message: format!("invalid JSON: {e}"),
                });
                continue;
            }
        };
        let (report, record) = check_record(&value, &vocab, mapping.as_ref());
        match record {
            Some(record) => {
                if !seen.insert(record.id.clone()) {
                    issues.push(CorpusError::DuplicateId {
                        id: record.id,
                        path: records_path.clone(),
                        line,
                    });
                } else {
                    artworks.push(record);
                }
            }
            None => issues.push(CorpusError::Schema {
                path: records_path.clone(),
                line,
                message: report.to_string(),
            }),
        }
    }

    let mut annotations = Vec::new();
    let mut gold = None;
    if let Some(sal) = &manifest.salience {
        let sal_path = resolve(base, sal);
        let sal_text = read(&sal_path)?;
        let mut pairs = BTreeSet::new();
        for (line, raw_line) in lines(&sal_text) {
            let ann: SalienceAnnotation = match serde_json::from_str(raw_line) {
                Ok(a) => a,
                Err(e) => {
                    issues.push(CorpusError::Schema {
                        path: sal_path.clone(),
                        line,
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            if !seen.contains(&ann.artwork_id) {
                issues.push(CorpusError::UnknownArtwork {
                    id: ann.artwork_id,
                    path: sal_path.clone(),
                    line,
                });
                continue;
            }
            if !pairs.insert((ann.artwork_id.clone(), ann.annotator_id.clone())) {
                issues.push(CorpusError::DuplicateAnnotation {
                    artwork_id: ann.artwork_id,
                    annotator_id: ann.annotator_id,
                    path: sal_path.clone(),
                    line,
                });
                continue;
            }
            annotations.push(ann);
        }
        let mut grouped: BTreeMap<&str, Vec<SalienceAnnotation>> = BTreeMap::new();
        for a in &annotations {
            grouped.entry(a.artwork_id.as_str()).or_default().push(a.clone());
        }
        let mut map = BTreeMap::new();
        for (id, anns) in grouped {
            map.insert(id.to_string(), consensus_salience(&anns, manifest.consensus)?);
        }
        gold = Some(map);
    }

    let dataset = if issues.is_empty() {
        Some(
            Dataset::new(manifest.name, manifest.source, vocab, artworks, gold)?
                .with_annotations(annotations)
                .with_mapping(mapping),
        )
    } else {
        None
    };
    Ok(Scan { issues, dataset })
}

/// Loads and validates a dataset from its manifest, failing on the first
/// problem found.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset, CorpusError> {
    let scan = scan(manifest_path.as_ref())?;
    if let Some(first) = scan.issues.into_iter().next() {
        return Err(first);
    }
    Ok(scan.dataset.expect("dataset is built when there are no issues"))
}

/// Like [`load_dataset`] but reports every record-level problem instead of
/// stopping at the first. `Err` is reserved for problems that prevent the
/// scan itself (unreadable files, malformed manifest, bad vocabulary).
pub fn check_manifest(manifest_path: impl AsRef<Path>) -> Result<Vec<CorpusError>, CorpusError> {
    Ok(scan(manifest_path.as_ref())?.issues)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn vocab() -> EmotionVocabulary {
        let mut aliases = BTreeMap::new();
        aliases.insert("Contentment".to_string(), vec!["content".to_string()]);
        EmotionVocabulary::new(
            vec!["Calm".into(), "Excited".into(), "Contentment".into()],
            aliases,
        )
        .unwrap()
    }

    fn valid() -> Value {
        json!({
            "id": "a1",
            "image_ref": "images/a1.jpg",
            "source": "emoart",
            "style": "Impressionism",
            "attribute_descriptions": {"color": "muted blues"},
            "emotion": "Calm",
            "arousal": "low",
            "valence": "positive",
            "curator_note": {"keep": true}
        })
    }

    #[test]
    fn valid_record_has_empty_report() {
        let (report, record) = check_record(&valid(), &vocab(), None);
        assert!(report.is_valid(), "{report}");
        let record = record.unwrap();
        assert_eq!(record.gold_affect.unwrap().emotion, "Calm");
        assert_eq!(record.extra["curator_note"], json!({"keep": true}));
        assert!(validate_record(&valid(), &vocab()).is_valid());
    }

    #[test]
    fn unknown_emotion_is_one_violation() {
        let mut v = valid();
        v["emotion"] = json!("Euphoric-ish");
        let report = validate_record(&v, &vocab());
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].message.contains("unknown emotion"));
    }

    #[test]
    fn bad_arousal_is_one_violation() {
        let mut v = valid();
        v["arousal"] = json!("medium");
        let report = validate_record(&v, &vocab());
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].message, "arousal must be high|low");
    }

    #[test]
    fn alias_resolves_to_label() {
        let mut v = valid();
        v["emotion"] = json!("content");
        let (_, rec) = check_record(&v, &vocab(), None);
        assert_eq!(rec.unwrap().gold_affect.unwrap().emotion, "Contentment");
    }

    #[test]
    fn partial_affect_and_bad_attribute_key() {
        let mut v = valid();
        v.as_object_mut().unwrap().remove("valence");
        v["attribute_descriptions"] = json!({"texture": "rough"});
        let report = validate_record(&v, &vocab());
        let fields: Vec<&str> = report.violations.iter().map(|v| v.field.as_str()).collect();
        assert_eq!(fields, vec!["attribute_descriptions", "affect"]);
    }

    #[test]
    fn missing_id_and_wrong_types() {
        let report = validate_record(&json!({"image_ref": 3, "source": "emoart"}), &vocab());
        let fields: Vec<&str> = report.violations.iter().map(|v| v.field.as_str()).collect();
        assert_eq!(fields, vec!["id", "image_ref"]);
        assert!(!validate_record(&json!([1, 2]), &vocab()).is_valid());
    }

    #[test]
    fn affect_is_optional() {
        let v = json!({"id": "x", "image_ref": "x.png", "source": "wikiart"});
        let (report, rec) = check_record(&v, &vocab(), None);
        assert!(report.is_valid());
        assert!(rec.unwrap().gold_affect.is_none());
    }

    #[test]
    fn mapping_is_applied_to_emotion() {
        let m = LabelMapping::new(
            "artemis",
            [
                ("contentment".to_string(), "Contentment".to_string()),
                ("awe".to_string(), super::super::UNMAPPED.to_string()),
            ],
            &vocab(),
        )
        .unwrap();
        let mut v = valid();
        v["emotion"] = json!("awe");
        let (report, rec) = check_record(&v, &vocab(), Some(&m));
        assert!(report.is_valid());
        let rec = rec.unwrap();
        assert!(rec.gold_affect.is_none());
        assert_eq!(rec.unmapped_emotion.as_deref(), Some("awe"));

        v["emotion"] = json!("amusement");
        assert!(!check_record(&v, &vocab(), Some(&m)).0.is_valid());
    }
}
