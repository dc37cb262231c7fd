use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{fold, CorpusError, EmotionVocabulary};

/// Marker used in mapping files for external labels with no internal
/// counterpart.
pub const UNMAPPED: &str = "UNMAPPED";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MappedLabel {
    Label(String),
    Unmapped,
}

/// Table from an external dataset's emotion labels into the run vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMapping {
    source_vocabulary: String,
    entries: BTreeMap<String, MappedLabel>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MappingFile {
    name: String,
    labels: BTreeMap<String, String>,
}

impl LabelMapping {
    /// Builds a mapping; every target must be a vocabulary label or
    /// [`UNMAPPED`], and external labels must be unique after case folding.
    pub fn new(
        source_vocabulary: impl Into<String>,
        table: impl IntoIterator<Item = (String, String)>,
        vocab: &EmotionVocabulary,
    ) -> Result<Self, CorpusError> {
        if vocab.resolve(UNMAPPED).is_some() {
            return Err(CorpusError::Mapping(format!(
                "vocabulary may not contain the reserved label {UNMAPPED}"
            )));
        }
        let mut entries = BTreeMap::new();
        for (external, target) in table {
            let key = fold(&external);
            if key.is_empty() {
                return Err(CorpusError::Mapping("empty external label".into()));
            }
            let mapped = if target == UNMAPPED {
                MappedLabel::Unmapped
            } else if vocab.contains(&target) {
                MappedLabel::Label(target)
            } else {
                return Err(CorpusError::Mapping(format!(
                    "\"{external}\" maps to \"{target}\", which is not in the vocabulary"
                )));
            };
            if entries.insert(key, mapped).is_some() {
                return Err(CorpusError::Mapping(format!(
                    "external label \"{external}\" appears more than once"
                )));
            }
        }
        Ok(Self {
            source_vocabulary: source_vocabulary.into(),
            entries,
        })
    }

    pub fn load(path: &Path, vocab: &EmotionVocabulary) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: MappingFile = serde_json::from_str(&text).map_err(|e| CorpusError::Schema {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        Self::new(file.name, file.labels, vocab)
    }

    pub fn source_vocabulary(&self) -> &str {
        &self.source_vocabulary
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Translates an external label into the internal vocabulary.
pub fn map_labels(external: &str, mapping: &LabelMapping) -> Result<MappedLabel, CorpusError> {
    mapping
        .entries
        .get(&fold(external))
        .cloned()
        .ok_or_else(|| CorpusError::UnknownExternalLabel(external.to_string()))
}
