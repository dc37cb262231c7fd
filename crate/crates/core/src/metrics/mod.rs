//! Scoring primitives. Everything here is a pure function of its inputs.
//!
//! Rates and scores are carried as fractions in `[0, 1]`; conversion to
//! percentages happens only when rendering reports.

mod agreement;
mod attrset;
mod compactness;
mod overlap;

use serde::{Deserialize, Serialize};

use crate::corpus::SalienceVector;

pub use agreement::{
    gwet_ac1, percent_agreement, read_ratings_jsonl, true_proportion, RatedItem, RatingMatrix,
};
pub use attrset::AttrSet;
pub use compactness::{
    compactness_summary, token_count, CompactnessSample, CompactnessSummary, Tokenizer,
    WhitespaceTokenizer,
};
pub use overlap::{
    alignment_summary, attribute_wise_alignment, dice, sample_wise_alignment, tversky,
    AlignmentSummary, AttributeAlignment, PairScore,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {preds} predictions vs {gold} gold labels")]
    LengthMismatch { preds: usize, gold: usize },
    #[error("item \"{item_id}\" has {count} rating(s); at least 2 are required")]
    InsufficientRaters { item_id: String, count: usize },
    #[error("chance agreement is 1; AC1 is undefined")]
    DegenerateChance,
    #[error("invalid Tversky parameters alpha={alpha}, beta={beta}")]
    InvalidParams { alpha: f64, beta: f64 },
    #[error("rater \"{rater_id}\" rated item \"{item_id}\" more than once")]
    DuplicateRating { item_id: String, rater_id: String },
    #[error("category {category} out of range for {categories} categories")]
    CategoryOutOfRange { category: usize, categories: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Penalty weights for false positives (`alpha`) and false negatives (`beta`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TverskyParams {
    pub alpha: f64,
    pub beta: f64,
}

impl TverskyParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, MetricsError> {
        if !(alpha.is_finite() && beta.is_finite() && alpha >= 0.0 && beta >= 0.0) {
            return Err(MetricsError::InvalidParams { alpha, beta });
        }
        Ok(Self { alpha, beta })
    }
}

impl Default for TverskyParams {
    /// False positives weighted 0.8, false negatives 0.2.
    fn default() -> Self {
        Self {
            alpha: 0.8,
            beta: 0.2,
        }
    }
}

/// Fraction of positions where prediction equals gold.
pub fn accuracy<T: PartialEq>(preds: &[T], gold: &[T]) -> Result<f64, MetricsError> {
    if preds.len() != gold.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            gold: gold.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let hits = preds.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Unweighted mean of the emotion, arousal and valence accuracies.
pub fn average_accuracy(emotion: f64, arousal: f64, valence: f64) -> f64 {
    (emotion + arousal + valence) / 3.0
}

/// Number of predicted attributes absent from the gold set.
pub fn flooding_count(predicted: AttrSet, gold: AttrSet) -> usize {
    predicted.difference(gold).len()
}

/// Number of salient attributes in a salience vector.
pub fn sparsity(s: &SalienceVector) -> usize {
    s.l0()
}
