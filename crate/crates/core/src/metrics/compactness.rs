use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Counts tokens in a delivered response. Reports record the tokenizer name
/// because length statistics depend on it.
pub trait Tokenizer: Send + Sync {
    fn name(&self) -> &str;
    fn count(&self, text: &str) -> usize;
}

/// Maximal runs of non-whitespace characters.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn name(&self) -> &str {
        "whitespace"
    }

    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// Token count under the default whitespace tokenizer.
pub fn token_count(text: &str) -> usize {
    WhitespaceTokenizer.count(text)
}

/// One scored final response. Correctness flags are `None` when the sample
/// has no comparable gold label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompactnessSample {
    pub tokens: usize,
    pub emotion_correct: Option<bool>,
    pub arousal_correct: Option<bool>,
    pub valence_correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactnessSummary {
    pub tokenizer: String,
    pub n: usize,
    pub mean_tokens: f64,
    /// Mean length over emotion-correct samples; absent when there are none.
    pub emotion_correct_mean: Option<f64>,
    pub arousal_correct_mean: Option<f64>,
    pub valence_correct_mean: Option<f64>,
}

fn conditional_mean(samples: &[CompactnessSample], pick: impl Fn(&CompactnessSample) -> Option<bool>) -> Option<f64> {
    let hits: Vec<usize> = samples
        .iter()
        .filter(|s| pick(s) == Some(true))
        .map(|s| s.tokens)
        .collect();
    (!hits.is_empty()).then(|| hits.iter().sum::<usize>() as f64 / hits.len() as f64)
}

pub fn compactness_summary(
    samples: &[CompactnessSample],
    tokenizer: &str,
) -> Result<CompactnessSummary, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let total: usize = samples.iter().map(|s| s.tokens).sum();
    Ok(CompactnessSummary {
        tokenizer: tokenizer.to_string(),
        n: samples.len(),
        mean_tokens: total as f64 / samples.len() as f64,
        emotion_correct_mean: conditional_mean(samples, |s| s.emotion_correct),
        arousal_correct_mean: conditional_mean(samples, |s| s.arousal_correct),
        valence_correct_mean: conditional_mean(samples, |s| s.valence_correct),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(tokens: usize, e: bool, a: bool, v: bool) -> CompactnessSample {
        CompactnessSample {
            tokens,
            emotion_correct: Some(e),
            arousal_correct: Some(a),
            valence_correct: Some(v),
        }
    }

    #[test]
    fn token_count_examples() {
        assert_eq!(token_count(""), 0);
        assert_eq!(token_count("   \n\t"), 0);
        assert_eq!(token_count("A calm scene."), 3);
        assert_eq!(token_count("  muted   palette "), 2);
    }

    #[test]
    fn constant_lengths() {
        let s = compactness_summary(&[sample(10, true, true, true); 3], "whitespace").unwrap();
        assert_eq!(s.mean_tokens, 10.0);
        assert_eq!(s.emotion_correct_mean, Some(10.0));
        assert_eq!(s.arousal_correct_mean, Some(10.0));
        assert_eq!(s.valence_correct_mean, Some(10.0));
    }

    #[test]
    fn conditional_means() {
        let s = compactness_summary(
            &[sample(10, true, false, true), sample(20, false, false, true)],
            "whitespace",
        )
        .unwrap();
        assert_eq!(s.mean_tokens, 15.0);
        assert_eq!(s.emotion_correct_mean, Some(10.0));
        assert_eq!(s.arousal_correct_mean, None);
        assert_eq!(s.valence_correct_mean, Some(15.0));
        assert_eq!(compactness_summary(&[], "whitespace"), Err(MetricsError::EmptyInput));
    }
}
