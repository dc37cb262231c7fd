//! Inter-annotator agreement: percent agreement and Gwet's AC1.
//!
//! Binary judgments use category 1 for "true" and 0 for "false". The
//! multi-category form of the chance term reduces to `2π(1−π)` when there
//! are two categories.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::Deserialize;

use super::MetricsError;

/// One item and the category each rater assigned to it.
#[derive(Debug, Clone, PartialEq)]
pub struct RatedItem {
    pub item_id: String,
    pub ratings: BTreeMap<String, usize>,
}

impl RatedItem {
    fn counts(&self, categories: usize) -> Vec<usize> {
        let mut c = vec![0; categories];
        for &v in self.ratings.values() {
            c[v] += 1;
        }
        c
    }
}

/// Items × raters judgments over `categories` classes. Raters may skip items.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    categories: usize,
    items: Vec<RatedItem>,
}

impl RatingMatrix {
    pub fn new(categories: usize, items: Vec<RatedItem>) -> Result<Self, MetricsError> {
        if items.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        if categories < 2 {
            return Err(MetricsError::CategoryOutOfRange {
                category: categories,
                categories: 2,
            });
        }
        for item in &items {
            if let Some(&bad) = item.ratings.values().find(|&&v| v >= categories) {
                return Err(MetricsError::CategoryOutOfRange {
                    category: bad,
                    categories,
                });
            }
        }
        Ok(Self { categories, items })
    }

    /// Binary matrix from `(item, rater, value)` triples, items kept in first-seen order.
    pub fn from_binary<I, S1, S2>(triples: I) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = (S1, S2, bool)>,
        S1: Into<String>,
        S2: Into<String>,
    {
        let mut items: Vec<RatedItem> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for (item, rater, value) in triples {
            let (item, rater) = (item.into(), rater.into());
            let slot = *index.entry(item.clone()).or_insert_with(|| {
                items.push(RatedItem {
                    item_id: item.clone(),
                    ratings: BTreeMap::new(),
                });
                items.len() - 1
            });
            if items[slot].ratings.insert(rater.clone(), value as usize).is_some() {
                return Err(MetricsError::DuplicateRating {
                    item_id: item,
                    rater_id: rater,
                });
            }
        }
        Self::new(2, items)
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn items(&self) -> &[RatedItem] {
        &self.items
    }

    /// Total number of individual ratings.
    pub fn n_ratings(&self) -> usize {
        self.items.iter().map(|i| i.ratings.len()).sum()
    }

    fn check_raters(&self) -> Result<(), MetricsError> {
        match self.items.iter().find(|i| i.ratings.len() < 2) {
            Some(i) => Err(MetricsError::InsufficientRaters {
                item_id: i.item_id.clone(),
                count: i.ratings.len(),
            }),
            None => Ok(()),
        }
    }
}

/// Mean over items of the fraction of agreeing rater pairs.
pub fn percent_agreement(m: &RatingMatrix) -> Result<f64, MetricsError> {
    m.check_raters()?;
    let total: f64 = m
        .items
        .iter()
        .map(|item| {
            let n = item.ratings.len();
            let agree: usize = item.counts(m.categories).iter().map(|&r| r * r.saturating_sub(1)).sum();
            agree as f64 / (n * (n - 1)) as f64
        })
        .sum();
    Ok(total / m.items.len() as f64)
}

fn chance_agreement(m: &RatingMatrix) -> f64 {
    let k = m.categories;
    let mut pi = vec![0.0; k];
    for item in &m.items {
        let n = item.ratings.len() as f64;
        for (c, r) in item.counts(k).into_iter().enumerate() {
            pi[c] += r as f64 / n;
        }
    }
    let n_items = m.items.len() as f64;
    pi.iter()
        .map(|p| {
            let p = p / n_items;
            p * (1.0 - p)
        })
        .sum::<f64>()
        / (k - 1) as f64
}

/// Gwet's AC1: `(Pa − Pe) / (1 − Pe)` with `Pe = Σ π_k(1−π_k) / (K−1)`.
pub fn gwet_ac1(m: &RatingMatrix) -> Result<f64, MetricsError> {
    let pa = percent_agreement(m)?;
    let pe = chance_agreement(m);
    if 1.0 - pe < 1e-12 {
        return Err(MetricsError::DegenerateChance);
    }
    Ok((pa - pe) / (1.0 - pe))
}

/// Fraction of all ratings that are in category 1 ("true").
pub fn true_proportion(m: &RatingMatrix) -> f64 {
    let n = m.n_ratings();
    if n == 0 {
        return 0.0;
    }
    let yes: usize = m
        .items
        .iter()
        .map(|i| i.ratings.values().filter(|&&v| v == 1).count())
        .sum();
    yes as f64 / n as f64
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RatingLine {
    item_id: String,
    rater_id: String,
    value: bool,
    #[serde(default)]
    section: Option<String>,
}

/// Reads `{item_id, rater_id, value, section?}` lines into one binary matrix
/// per section. Lines without a section fall under `"all"`. Sections come
/// back in first-seen order.
pub fn read_ratings_jsonl<R: BufRead>(reader: R) -> Result<Vec<(String, RatingMatrix)>, MetricsError> {
    type Triple = (String, String, bool);
    let mut sections: Vec<(String, Vec<Triple>)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MetricsError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let r: RatingLine = serde_json::from_str(&line).map_err(|e| MetricsError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let name = r.section.unwrap_or_else(|| "all".to_string());
        let triple = (r.item_id, r.rater_id, r.value);
        match sections.iter_mut().find(|(s, _)| *s == name) {
            Some((_, v)) => v.push(triple),
            None => sections.push((name, vec![triple])),
        }
    }
    if sections.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    sections
        .into_iter()
        .map(|(name, triples)| Ok((name, RatingMatrix::from_binary(triples)?)))
        .collect()
}
