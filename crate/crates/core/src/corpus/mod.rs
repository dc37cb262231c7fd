//! Artwork data model: attributes, affect labels, salience annotations and
//! the datasets that bundle them.
//!
//! Datasets are described by a JSON manifest that points at a JSON-lines
//! record file, an optional JSON-lines salience file, and an optional
//! external-label mapping. See [`load_dataset`].

mod consensus;
mod load;
mod mapping;
mod split;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::metrics::AttrSet;

pub use consensus::{consensus_salience, ConsensusRule};
pub use load::{check_manifest, load_dataset, validate_record, Manifest, ValidationReport, Violation};
pub use mapping::{map_labels, LabelMapping, MappedLabel, UNMAPPED};
pub use split::split_dataset;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: line {line}: {message}", path.display())]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: line {line}: duplicate artwork id \"{id}\"", path.display())]
    DuplicateId { id: String, path: PathBuf, line: usize },
    #[error("{}: line {line}: duplicate annotation for artwork \"{artwork_id}\" by annotator \"{annotator_id}\"", path.display())]
    DuplicateAnnotation {
        artwork_id: String,
        annotator_id: String,
        path: PathBuf,
        line: usize,
    },
    #[error("{}: line {line}: salience refers to unknown artwork \"{id}\"", path.display())]
    UnknownArtwork { id: String, path: PathBuf, line: usize },
    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),
    #[error("invalid label mapping: {0}")]
    Mapping(String),
    #[error("external label \"{0}\" is not in the label mapping")]
    UnknownExternalLabel(String),
    #[error("consensus requires at least one annotation")]
    EmptyAnnotationSet,
    #[error("annotations mix artwork ids \"{0}\" and \"{1}\"")]
    MixedArtworkIds(String, String),
    #[error("bad split ratios: {0}")]
    BadRatios(String),
}

/// One of the five formal attributes, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeId {
    Color,
    Composition,
    Line,
    Light,
    Brushstroke,
}

impl AttributeId {
    pub const ALL: [AttributeId; 5] = [
        AttributeId::Color,
        AttributeId::Composition,
        AttributeId::Line,
        AttributeId::Light,
        AttributeId::Brushstroke,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttributeId::Color => "color",
            AttributeId::Composition => "composition",
            AttributeId::Line => "line",
            AttributeId::Light => "light",
            AttributeId::Brushstroke => "brushstroke",
        }
    }

    /// Position in the canonical ordering.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<AttributeId> {
        Self::ALL.get(i).copied()
    }

    /// One-line definition used when an attribute is named in a prompt.
    ///
    /// Definitions never mention another attribute's name, so a prompt that
    /// lists a subset of attributes cannot leak the others through them.
    pub fn definition(self) -> &'static str {
        match self {
            AttributeId::Color => "hue, saturation and the overall palette",
            AttributeId::Composition => "arrangement of forms, balance and spatial structure",
            AttributeId::Line => "contours, edges and the direction of drawn marks",
            AttributeId::Light => "illumination, shadow and tonal contrast",
            AttributeId::Brushstroke => "visible paint handling, texture and mark-making",
        }
    }
}

impl fmt::Display for AttributeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown attribute \"{0}\"")]
pub struct UnknownAttribute(pub String);

impl FromStr for AttributeId {
    type Err = UnknownAttribute;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded = s.trim().to_ascii_lowercase();
        AttributeId::ALL
            .into_iter()
            .find(|a| a.name() == folded)
            .ok_or_else(|| UnknownAttribute(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arousal {
    High,
    Low,
}

impl Arousal {
    pub fn as_str(self) -> &'static str {
        match self {
            Arousal::High => "high",
            Arousal::Low => "low",
        }
    }

    pub fn other(self) -> Arousal {
        match self {
            Arousal::High => Arousal::Low,
            Arousal::Low => Arousal::High,
        }
    }
}

impl FromStr for Arousal {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match fold(s).as_str() {
            "high" => Ok(Arousal::High),
            "low" => Ok(Arousal::Low),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Valence {
    Positive,
    Negative,
}

impl Valence {
    pub fn as_str(self) -> &'static str {
        match self {
            Valence::Positive => "positive",
            Valence::Negative => "negative",
        }
    }

    pub fn other(self) -> Valence {
        match self {
            Valence::Positive => Valence::Negative,
            Valence::Negative => Valence::Positive,
        }
    }
}

impl FromStr for Valence {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match fold(s).as_str() {
            "positive" => Ok(Valence::Positive),
            "negative" => Ok(Valence::Negative),
            _ => Err(()),
        }
    }
}

/// Trim, strip surrounding punctuation and lowercase.
pub(crate) fn fold(s: &str) -> String {
    s.trim()
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Ordered emotion labels plus aliases, all matched case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmotionVocabulary {
    labels: Vec<String>,
    aliases: BTreeMap<String, Vec<String>>,
    lookup: BTreeMap<String, usize>,
}

impl EmotionVocabulary {
    pub fn new(
        labels: Vec<String>,
        aliases: BTreeMap<String, Vec<String>>,
    ) -> Result<Self, CorpusError> {
        if labels.is_empty() {
            return Err(CorpusError::Vocabulary("no labels".into()));
        }
        let mut lookup = BTreeMap::new();
        for (i, label) in labels.iter().enumerate() {
            let key = fold(label);
            if key.is_empty() {
                return Err(CorpusError::Vocabulary(format!("empty label \"{label}\"")));
            }
            if lookup.insert(key, i).is_some() {
                return Err(CorpusError::Vocabulary(format!("duplicate label \"{label}\"")));
            }
        }
        for (label, alts) in &aliases {
            let Some(&target) = lookup.get(&fold(label)) else {
                return Err(CorpusError::Vocabulary(format!(
                    "aliases given for unknown label \"{label}\""
                )));
            };
            for alias in alts {
                let key = fold(alias);
                if key.is_empty() {
                    return Err(CorpusError::Vocabulary(format!("empty alias for \"{label}\"")));
                }
                match lookup.get(&key) {
                    Some(&existing) if existing != target => {
                        return Err(CorpusError::Vocabulary(format!(
                            "alias \"{alias}\" maps to both \"{}\" and \"{}\"",
                            labels[existing], labels[target]
                        )))
                    }
                    _ => {
                        lookup.insert(key, target);
                    }
                }
            }
        }
        Ok(Self {
            labels,
            aliases,
            lookup,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn aliases(&self) -> &BTreeMap<String, Vec<String>> {
        &self.aliases
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Exact match on an already-folded key against labels and aliases.
    pub(crate) fn lookup_folded(&self, key: &str) -> Option<&str> {
        self.lookup.get(key).map(|&i| self.labels[i].as_str())
    }

    /// Canonical label for `raw` after folding, if any.
    pub fn resolve(&self, raw: &str) -> Option<&str> {
        self.lookup_folded(&fold(raw))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffectLabels {
    pub emotion: String,
    pub arousal: Arousal,
    pub valence: Valence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Emoart,
    Abstract,
    Artemis,
    Wikiart,
    Other,
}

impl FromStr for Source {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "emoart" => Ok(Source::Emoart),
            "abstract" => Ok(Source::Abstract),
            "artemis" => Ok(Source::Artemis),
            "wikiart" => Ok(Source::Wikiart),
            "other" => Ok(Source::Other),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtworkRecord {
    pub id: String,
    pub image_ref: String,
    pub source: Source,
    pub style: Option<String>,
    pub content: Option<String>,
    pub attribute_descriptions: BTreeMap<AttributeId, String>,
    pub gold_affect: Option<AffectLabels>,
    /// External emotion label that the dataset's mapping marks as unmapped.
    /// Such records carry no `gold_affect` and are excluded from accuracy.
    pub unmapped_emotion: Option<String>,
    /// Fields not part of the schema, kept verbatim.
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// Binary salience decision for each of the five attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SalienceVector([bool; 5]);

impl SalienceVector {
    pub fn new(decisions: [bool; 5]) -> Self {
        Self(decisions)
    }

    pub fn from_set(set: AttrSet) -> Self {
        let mut v = Self::default();
        for a in set.iter() {
            v.0[a.index()] = true;
        }
        v
    }

    pub fn get(&self, a: AttributeId) -> bool {
        self.0[a.index()]
    }

    pub fn set(&mut self, a: AttributeId, salient: bool) {
        self.0[a.index()] = salient;
    }

    pub fn decisions(&self) -> [bool; 5] {
        self.0
    }

    /// The set of salient attributes.
    pub fn support(&self) -> AttrSet {
        AttributeId::ALL.into_iter().filter(|&a| self.get(a)).collect()
    }

    /// Number of salient attributes.
    pub fn l0(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl Serialize for SalienceVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(5))?;
        for a in AttributeId::ALL {
            map.serialize_entry(a.name(), &self.get(a))?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for SalienceVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = SalienceVector;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from each of the five attributes to a boolean")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<SalienceVector, A::Error> {
                let mut seen = [None; 5];
                while let Some(key) = map.next_key::<String>()? {
                    let attr: AttributeId = key.parse().map_err(de::Error::custom)?;
                    if seen[attr.index()].is_some() {
                        return Err(de::Error::custom(format!("duplicate attribute \"{attr}\"")));
                    }
                    seen[attr.index()] = Some(map.next_value::<bool>()?);
                }
                let mut out = [false; 5];
                for a in AttributeId::ALL {
                    out[a.index()] = seen[a.index()]
                        .ok_or_else(|| de::Error::custom(format!("missing attribute \"{a}\"")))?;
                }
                Ok(SalienceVector(out))
            }
        }
        deserializer.deserialize_map(V)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SalienceAnnotation {
    pub artwork_id: String,
    pub annotator_id: String,
    pub salience: SalienceVector,
}

/// A validated, immutable collection of artworks and their gold data.
#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    source: Option<String>,
    vocabulary: EmotionVocabulary,
    mapping: Option<LabelMapping>,
    artworks: Vec<ArtworkRecord>,
    index: BTreeMap<String, usize>,
    gold_salience: Option<BTreeMap<String, SalienceVector>>,
    annotations: Vec<SalienceAnnotation>,
    digest: String,
}

impl Dataset {
    /// Assembles a dataset, checking id uniqueness and that every gold
    /// salience key names an artwork.
    pub fn new(
        name: impl Into<String>,
        source: Option<String>,
        vocabulary: EmotionVocabulary,
        artworks: Vec<ArtworkRecord>,
        gold_salience: Option<BTreeMap<String, SalienceVector>>,
    ) -> Result<Self, CorpusError> {
        let mut index = BTreeMap::new();
        for (i, a) in artworks.iter().enumerate() {
            if a.id.is_empty() {
                return Err(CorpusError::Schema {
                    path: PathBuf::new(),
                    line: i + 1,
                    message: "empty artwork id".into(),
                });
            }
            if index.insert(a.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId {
                    id: a.id.clone(),
                    path: PathBuf::new(),
                    line: i + 1,
                });
            }
        }
        if let Some(gold) = &gold_salience {
            if let Some(missing) = gold.keys().find(|k| !index.contains_key(*k)) {
                return Err(CorpusError::UnknownArtwork {
                    id: missing.clone(),
                    path: PathBuf::new(),
                    line: 0,
                });
            }
        }
        let mut ds = Self {
            name: name.into(),
            source,
            vocabulary,
            mapping: None,
            artworks,
            index,
            gold_salience,
            annotations: Vec::new(),
            digest: String::new(),
        };
        ds.digest = ds.compute_digest();
        Ok(ds)
    }

    pub(crate) fn with_annotations(mut self, annotations: Vec<SalienceAnnotation>) -> Self {
        self.annotations = annotations;
        self
    }

    pub(crate) fn with_mapping(mut self, mapping: Option<LabelMapping>) -> Self {
        self.mapping = mapping;
        self
    }

    fn compute_digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.vocabulary.labels().join("\u{1f}").as_bytes());
        for a in &self.artworks {
            h.update(b"\x1e");
            h.update(a.id.as_bytes());
            h.update(b"\x1f");
            match &a.gold_affect {
                Some(g) => h.update(
                    format!("{}|{}|{}", g.emotion, g.arousal.as_str(), g.valence.as_str()).as_bytes(),
                ),
                None => h.update(b"-"),
            }
            h.update(b"\x1f");
            if let Some(s) = self.gold_salience(&a.id) {
                for d in s.decisions() {
                    h.update([d as u8 + b'0']);
                }
            }
        }
        hex::encode(h.finalize())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn vocabulary(&self) -> &EmotionVocabulary {
        &self.vocabulary
    }

    pub fn mapping(&self) -> Option<&LabelMapping> {
        self.mapping.as_ref()
    }

    pub fn artworks(&self) -> &[ArtworkRecord] {
        &self.artworks
    }

    pub fn len(&self) -> usize {
        self.artworks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.artworks.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ArtworkRecord> {
        self.index.get(id).map(|&i| &self.artworks[i])
    }

    pub fn has_gold_salience(&self) -> bool {
        self.gold_salience.is_some()
    }

    pub fn gold_salience(&self, id: &str) -> Option<&SalienceVector> {
        self.gold_salience.as_ref().and_then(|g| g.get(id))
    }

    pub fn gold_salience_map(&self) -> Option<&BTreeMap<String, SalienceVector>> {
        self.gold_salience.as_ref()
    }

    /// Raw per-annotator salience judgements, when loaded from a salience file.
    pub fn annotations(&self) -> &[SalienceAnnotation] {
        &self.annotations
    }

    /// Content digest over vocabulary, gold affect and gold salience.
    pub fn digest(&self) -> &str {
        &self.digest
    }
}
