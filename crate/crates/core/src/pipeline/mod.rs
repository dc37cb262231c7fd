//! Evaluation conditions over a dataset and their on-disk run artifacts.
//!
//! A run directory holds:
//!
//! - `manifest.json`: config, template digests, backend model ids, timestamps.
//!   Written before the first record.
//! - `records.jsonl`: one [`PredictionRecord`] per artwork, in dataset order.
//!   Records carry no timestamps, so fixture and oracle runs are
//!   byte-reproducible.
//! - `telemetry.jsonl`: per-query latency, usage and cache hits.
//! - `done.marker`: empty file, written last.

mod config;
mod prompts;
mod run;
mod template;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::BackendError;
use crate::corpus::{AttributeId, CorpusError, SalienceVector};
use crate::metrics::AttrSet;
use crate::parse::{FinalPrediction, ParseFailure, SalienceDecision};

pub use config::{Condition, ConditionSection, ConfigError, DatasetSection, LimitsSection, RunConfig, RunSection, SalienceSource};
pub use prompts::{audit_exclusivity, PromptPaths, PromptTemplateSet};
pub use run::{execute, DryRunEntry, RunOptions, RunSummary};
pub use template::{Template, TemplateError};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const TELEMETRY_FILE: &str = "telemetry.jsonl";
pub const DONE_FILE: &str = "done.marker";
pub const DRY_RUN_FILE: &str = "dry_run.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("fatal backend error on {request_id}: {source}")]
    Backend {
        request_id: String,
        #[source]
        source: BackendError,
    },
    #[error("backend setup for `{role}`: {source}")]
    BackendSetup {
        role: String,
        #[source]
        source: BackendError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{} already holds a run; pass --resume to continue it", .0.display())]
    OutputExists(PathBuf),
    #[error("cannot resume: config digest {found} differs from the run's {expected}")]
    ConfigMismatch { expected: String, found: String },
    #[error("{}: line {line}: {message}", path.display())]
    CorruptArtifact {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("gold salience requested but the dataset has none")]
    MissingGold,
    #[error("run has no records")]
    EmptyRun,
}

impl RunError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Result of one query whose response is parsed into `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome<T> {
    Parsed { raw: String, value: T },
    ParseFailed { raw: String, failure: ParseFailure },
    BackendFailed { message: String },
    /// The query was never issued.
    Skipped { reason: String },
}

impl<T> Outcome<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Outcome::Parsed { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn raw(&self) -> Option<&str> {
        match self {
            Outcome::Parsed { raw, .. } | Outcome::ParseFailed { raw, .. } => Some(raw),
            _ => None,
        }
    }

    pub fn parse_failure(&self) -> Option<&ParseFailure> {
        match self {
            Outcome::ParseFailed { failure, .. } => Some(failure),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeOutcome {
    pub attribute: AttributeId,
    #[serde(flatten)]
    pub outcome: Outcome<SalienceDecision>,
}

impl AttributeOutcome {
    /// Parse and backend failures count as not salient.
    pub fn salient(&self) -> bool {
        self.outcome.value().is_some_and(|d| d.salient)
    }
}

/// One artwork's pass through a condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub artwork_id: String,
    pub condition: Condition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub salience_source: Option<SalienceSource>,
    /// Stage-one outcomes; empty for baselines and gold-salience runs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attributes: Vec<AttributeOutcome>,
    /// The bottleneck handed to the final agent (fabg only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub salience_vector: Option<SalienceVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_prompt: Option<String>,
    #[serde(rename = "final")]
    pub final_: Outcome<FinalPrediction>,
    pub final_token_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PredictionRecord {
    pub fn prediction(&self) -> Option<&FinalPrediction> {
        self.final_.value()
    }

    /// Attribute set scored for alignment: the bottleneck support for fabg,
    /// the declared `salient_attributes` for baselines. Failures give the
    /// empty set.
    pub fn predicted_attributes(&self) -> AttrSet {
        match self.condition {
            Condition::Fabg => self.salience_vector.map(|s| s.support()).unwrap_or_default(),
            _ => self
                .prediction()
                .and_then(|p| p.salient_attributes)
                .unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub condition: Condition,
    pub salience_source: Option<SalienceSource>,
    pub config_digest: String,
    pub config: RunConfig,
    pub dataset_name: String,
    pub dataset_digest: String,
    pub n_artworks: usize,
    pub template_digests: BTreeMap<String, String>,
    /// Role key from the config to model id and sampling parameters.
    pub backends: BTreeMap<String, BackendInfo>,
    pub seed: u64,
    pub code_version: String,
    pub started_at: String,
    #[serde(default)]
    pub resumed_at: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendInfo {
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

/// A run directory read back from disk.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub records: Vec<PredictionRecord>,
    pub complete: bool,
}

/// Reads a run directory. A partial trailing line (left by an interrupted
/// write) is ignored; any other malformed line is an error.
pub fn load_run(dir: &Path) -> Result<RunArtifact, RunError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| RunError::io(&manifest_path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| RunError::CorruptArtifact {
        path: manifest_path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let records_path = dir.join(RECORDS_FILE);
    let records = match fs::read_to_string(&records_path) {
        Ok(text) => parse_records(&text, &records_path)?.0,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(RunError::io(&records_path, e)),
    };
    Ok(RunArtifact {
        dir: dir.to_path_buf(),
        manifest,
        records,
        complete: dir.join(DONE_FILE).exists(),
    })
}

/// Parsed records plus the byte length of the complete lines.
pub(crate) fn parse_records(text: &str, path: &Path) -> Result<(Vec<PredictionRecord>, usize), RunError> {
    let mut records = Vec::new();
    let mut consumed = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if !line.ends_with('\n') {
            log::warn!("{}: ignoring partial trailing line", path.display());
            break;
        }
        consumed += line.len();
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| RunError::CorruptArtifact {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok((records, consumed))
}

/// Distribution of bottleneck sizes over a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityDiagnostics {
    pub n: usize,
    pub mean_l0: f64,
    /// Count of records per support size 0..=5.
    pub distribution: [usize; 6],
    /// Fraction of records whose support holds all five attributes.
    pub flooding_regime_fraction: f64,
}

pub fn sparsity_regime_check(records: &[PredictionRecord]) -> Result<SparsityDiagnostics, RunError> {
    if records.is_empty() {
        return Err(RunError::EmptyRun);
    }
    let mut distribution = [0usize; 6];
    for r in records {
        distribution[r.predicted_attributes().len()] += 1;
    }
    let n = records.len();
    let total: usize = distribution.iter().enumerate().map(|(k, c)| k * c).sum();
    Ok(SparsityDiagnostics {
        n,
        mean_l0: total as f64 / n as f64,
        distribution,
        flooding_regime_fraction: distribution[5] as f64 / n as f64,
    })
}
