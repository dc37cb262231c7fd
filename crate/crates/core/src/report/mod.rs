//! Scoring completed runs against gold data, comparing scored runs, and
//! rendering result tables.
//!
//! Scores are stored as fractions. Renderers show accuracies as percentages
//! with two decimals and Dice/Tversky with four.

mod render;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::{AttributeId, Dataset};
use crate::metrics::{
    accuracy, alignment_summary, average_accuracy, compactness_summary, flooding_count, gwet_ac1,
    percent_agreement, true_proportion, AlignmentSummary, CompactnessSample, CompactnessSummary,
    MetricsError, PairScore, RatingMatrix, TverskyParams, WhitespaceTokenizer, Tokenizer,
};
use crate::pipeline::{sparsity_regime_check, Outcome, RunArtifact, RunError};

pub use render::{
    render_agreement_markdown, render_comparison_markdown, render_csv, render_json, render_markdown,
    write_report_files, AVERAGE_TOLERANCE,
};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("run in {} has no completion marker", .0.display())]
    RunIncomplete(PathBuf),
    #[error("record refers to artwork \"{0}\" which is not in the gold dataset")]
    UnknownArtwork(String),
    #[error("gold data has no {0}")]
    MissingGold(&'static str),
    #[error("reports were scored against different gold data ({a} vs {b})")]
    GoldMismatch { a: String, b: String },
    #[error("{label}: average accuracy {average} is not the mean of its three columns")]
    InconsistentAverage { label: String, average: f64 },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracySection {
    pub emotion: f64,
    pub arousal: f64,
    pub valence: f64,
    pub average: f64,
}

impl AccuracySection {
    pub fn new(emotion: f64, arousal: f64, valence: f64) -> Self {
        Self {
            emotion,
            arousal,
            valence,
            average: average_accuracy(emotion, arousal, valence),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodingStats {
    /// Mean number of predicted attributes outside the gold set; absent
    /// without gold salience.
    pub mean_flooding_count: Option<f64>,
    /// Fraction of records predicting all five attributes.
    pub flooding_regime_fraction: f64,
    pub mean_sparsity: f64,
    /// Records per predicted support size 0..=5.
    pub sparsity_distribution: [usize; 6],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FailureTally {
    /// Parse failures per failure kind.
    pub attribute_parse: BTreeMap<String, usize>,
    pub final_parse: BTreeMap<String, usize>,
    pub attribute_backend: usize,
    pub final_backend: usize,
    /// Records whose final query was never issued.
    pub final_skipped: usize,
}

impl FailureTally {
    pub fn final_parse_total(&self) -> usize {
        self.final_parse.values().sum()
    }

    pub fn attribute_parse_total(&self) -> usize {
        self.attribute_parse.values().sum()
    }
}

/// A scored run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Row label, e.g. `qwen3-vl fabg`.
    pub label: String,
    pub condition: String,
    pub model_id: String,
    pub config_digest: String,
    pub gold_digest: String,
    pub tversky: TverskyParams,
    pub tokenizer: String,
    /// Records scored.
    pub n_records: usize,
    /// Records with comparable gold affect labels.
    pub n_samples: usize,
    /// Records without comparable gold affect (unmapped or missing labels).
    pub n_excluded: usize,
    pub accuracy: Option<AccuracySection>,
    pub alignment: Option<AlignmentSummary>,
    pub flooding: FloodingStats,
    pub compactness: Option<CompactnessSummary>,
    pub failures: FailureTally,
}

/// Scores a complete run. Final-stage failures count as wrong labels and
/// as an empty predicted attribute set.
pub fn score_run(run: &RunArtifact, gold: &Dataset, params: TverskyParams) -> Result<EvaluationReport, ReportError> {
    if !run.complete {
        return Err(ReportError::RunIncomplete(run.dir.clone()));
    }
    let records = &run.records;
    let diag = sparsity_regime_check(records)?;

    let mut hits = [Vec::new(), Vec::new(), Vec::new()];
    let mut pairs = Vec::new();
    let mut compact = Vec::new();
    let mut failures = FailureTally::default();
    for rec in records {
        let art = gold
            .get(&rec.artwork_id)
            .ok_or_else(|| ReportError::UnknownArtwork(rec.artwork_id.clone()))?;
        for o in &rec.attributes {
            match &o.outcome {
                Outcome::ParseFailed { failure, .. } => {
                    *failures.attribute_parse.entry(failure.kind.as_str().to_string()).or_default() += 1
                }
                Outcome::BackendFailed { .. } => failures.attribute_backend += 1,
                _ => {}
            }
        }
        match &rec.final_ {
            Outcome::ParseFailed { failure, .. } => {
                *failures.final_parse.entry(failure.kind.as_str().to_string()).or_default() += 1
            }
            Outcome::BackendFailed { .. } => failures.final_backend += 1,
            Outcome::Skipped { .. } => failures.final_skipped += 1,
            Outcome::Parsed { .. } => {}
        }

        let pred = rec.prediction();
        let correct = art.gold_affect.as_ref().map(|g| {
            [
                pred.is_some_and(|p| p.emotion == g.emotion),
                pred.is_some_and(|p| p.arousal == g.arousal),
                pred.is_some_and(|p| p.valence == g.valence),
            ]
        });
        if let Some(c) = correct {
            for (h, ok) in hits.iter_mut().zip(c) {
                h.push(ok);
            }
        }
        if rec.final_.raw().is_some() {
            compact.push(CompactnessSample {
                tokens: rec.final_token_count,
                emotion_correct: correct.map(|c| c[0]),
                arousal_correct: correct.map(|c| c[1]),
                valence_correct: correct.map(|c| c[2]),
            });
        }
        if let Some(g) = gold.gold_salience(&rec.artwork_id) {
            pairs.push((rec.predicted_attributes(), g.support()));
        }
    }

    let n_samples = hits[0].len();
    let acc = |h: &Vec<bool>| accuracy(h, &vec![true; h.len()]);
    let accuracy = if n_samples > 0 {
        Some(AccuracySection::new(acc(&hits[0])?, acc(&hits[1])?, acc(&hits[2])?))
    } else {
        None
    };
    let (alignment, mean_flooding_count) = if pairs.is_empty() {
        (None, None)
    } else {
        let total: usize = pairs.iter().map(|&(p, g)| flooding_count(p, g)).sum();
        (Some(alignment_summary(&pairs, params)?), Some(total as f64 / pairs.len() as f64))
    };
    if accuracy.is_none() && alignment.is_none() {
        return Err(ReportError::MissingGold("affect labels or salience annotations for these records"));
    }
    let tokenizer = WhitespaceTokenizer.name().to_string();
    let compactness = if compact.is_empty() {
        None
    } else {
        Some(compactness_summary(&compact, &tokenizer)?)
    };

    let m = &run.manifest;
    let model_id = m
        .backends
        .get("final")
        .map(|b| b.model_id.clone())
        .unwrap_or_default();
    Ok(EvaluationReport {
        label: format!("{model_id} {}", m.condition.as_str()),
        condition: m.condition.as_str().to_string(),
        model_id,
        config_digest: m.config_digest.clone(),
        gold_digest: gold.digest().to_string(),
        tversky: params,
        tokenizer,
        n_records: records.len(),
        n_samples,
        n_excluded: records.len() - n_samples,
        accuracy,
        alignment,
        flooding: FloodingStats {
            mean_flooding_count,
            flooding_regime_fraction: diag.flooding_regime_fraction,
            mean_sparsity: diag.mean_l0,
            sparsity_distribution: diag.distribution,
        },
        compactness,
        failures,
    })
}

/// Signed difference `b - a` for one metric, in display units
/// (percentage points for accuracies, raw scores otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: String,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunComparison {
    pub a: String,
    pub b: String,
    pub gold_digest: String,
    pub deltas: Vec<MetricDelta>,
    pub per_attribute: BTreeMap<AttributeId, PairScore>,
}

impl RunComparison {
    pub fn delta(&self, metric: &str) -> Option<f64> {
        self.deltas.iter().find(|d| d.metric == metric).map(|d| d.delta)
    }
}

fn metric_values(r: &EvaluationReport) -> Vec<(&'static str, Option<f64>)> {
    let acc = r.accuracy.as_ref();
    let al = r.alignment.as_ref();
    let co = r.compactness.as_ref();
    vec![
        ("emotion_acc", acc.map(|a| a.emotion * 100.0)),
        ("arousal_acc", acc.map(|a| a.arousal * 100.0)),
        ("valence_acc", acc.map(|a| a.valence * 100.0)),
        ("avg_acc", acc.map(|a| a.average * 100.0)),
        ("sample_dice", al.map(|a| a.sample_wise_mean_dice)),
        ("sample_tversky", al.map(|a| a.sample_wise_mean_tversky)),
        ("attr_dice", al.map(|a| a.attribute_wise_mean_dice)),
        ("attr_tversky", al.map(|a| a.attribute_wise_mean_tversky)),
        ("mean_flooding_count", r.flooding.mean_flooding_count),
        ("mean_sparsity", Some(r.flooding.mean_sparsity)),
        ("mean_tokens", co.map(|c| c.mean_tokens)),
    ]
}

/// Deltas `b - a` for every metric present in both reports.
pub fn compare_runs(a: &EvaluationReport, b: &EvaluationReport) -> Result<RunComparison, ReportError> {
    if a.gold_digest != b.gold_digest {
        return Err(ReportError::GoldMismatch {
            a: a.gold_digest.clone(),
            b: b.gold_digest.clone(),
        });
    }
    let deltas = metric_values(a)
        .into_iter()
        .zip(metric_values(b))
        .filter_map(|((metric, va), (_, vb))| {
            let (va, vb) = (va?, vb?);
            Some(MetricDelta {
                metric: metric.to_string(),
                a: va,
                b: vb,
                delta: vb - va,
            })
        })
        .collect();
    let per_attribute = match (&a.alignment, &b.alignment) {
        (Some(x), Some(y)) => AttributeId::ALL
            .into_iter()
            .filter_map(|attr| {
                let (sa, sb) = (x.per_attribute.get(&attr)?, y.per_attribute.get(&attr)?);
                Some((
                    attr,
                    PairScore {
                        dice: sb.dice - sa.dice,
                        tversky: sb.tversky - sa.tversky,
                    },
                ))
            })
            .collect(),
        _ => BTreeMap::new(),
    };
    Ok(RunComparison {
        a: a.label.clone(),
        b: b.label.clone(),
        gold_digest: a.gold_digest.clone(),
        deltas,
        per_attribute,
    })
}

/// One row of the inter-annotator agreement table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub section: String,
    pub true_proportion: f64,
    pub percent_agreement: f64,
    pub ac1: f64,
    /// Number of individual ratings.
    pub sample_size: usize,
}

pub fn agreement_report(sections: &[(String, RatingMatrix)]) -> Result<Vec<AgreementRow>, MetricsError> {
    sections
        .iter()
        .map(|(section, m)| {
            Ok(AgreementRow {
                section: section.clone(),
                true_proportion: true_proportion(m),
                percent_agreement: percent_agreement(m)?,
                ac1: gwet_ac1(m)?,
                sample_size: m.n_ratings(),
            })
        })
        .collect()
}
