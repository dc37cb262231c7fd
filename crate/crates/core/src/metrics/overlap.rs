//! Dice and Tversky overlap between predicted and gold attribute sets,
//! with sample-wise and attribute-wise aggregation.
//!
//! Both scores are defined as 1.0 when the two sets are empty: agreeing
//! that nothing is salient counts as full agreement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AttrSet, MetricsError, TverskyParams};
use crate::corpus::AttributeId;

fn dice_counts(inter: usize, p: usize, g: usize) -> f64 {
    if p + g == 0 {
        return 1.0;
    }
    2.0 * inter as f64 / (p + g) as f64
}

fn tversky_counts(inter: usize, fp: usize, fneg: usize, params: TverskyParams) -> f64 {
    if inter + fp + fneg == 0 {
        return 1.0;
    }
    let denom = inter as f64 + params.alpha * fp as f64 + params.beta * fneg as f64;
    // denom == 0 forces inter == 0 with zero-weighted errors: no overlap.
    if denom == 0.0 {
        return 0.0;
    }
    inter as f64 / denom
}

/// `2|P∩G| / (|P|+|G|)`.
pub fn dice(p: AttrSet, g: AttrSet) -> f64 {
    dice_counts(p.intersection(g).len(), p.len(), g.len())
}

/// `|P∩G| / (|P∩G| + α|P\G| + β|G\P|)`.
pub fn tversky(p: AttrSet, g: AttrSet, params: TverskyParams) -> f64 {
    tversky_counts(
        p.intersection(g).len(),
        p.difference(g).len(),
        g.difference(p).len(),
        params,
    )
}

/// Unweighted mean over samples of per-sample Dice and Tversky.
pub fn sample_wise_alignment(
    pairs: &[(AttrSet, AttrSet)],
    params: TverskyParams,
) -> Result<(f64, f64), MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = pairs.len() as f64;
    let d: f64 = pairs.iter().map(|&(p, g)| dice(p, g)).sum();
    let t: f64 = pairs.iter().map(|&(p, g)| tversky(p, g, params)).sum();
    Ok((d / n, t / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub dice: f64,
    pub tversky: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeAlignment {
    pub per_attribute: BTreeMap<AttributeId, PairScore>,
    pub mean_dice: f64,
    pub mean_tversky: f64,
}

/// Per-attribute scores over sample-index sets.
///
/// For attribute `a`, the predicted set is the indices of samples whose
/// prediction contains `a` and the gold set is the indices whose gold
/// contains `a`; Dice and Tversky are taken between those index sets. The
/// attribute-wise mean is the unweighted mean over the five attributes.
pub fn attribute_wise_alignment(
    pairs: &[(AttrSet, AttrSet)],
    params: TverskyParams,
) -> Result<AttributeAlignment, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut per_attribute = BTreeMap::new();
    for a in AttributeId::ALL {
        let (mut inter, mut fp, mut fneg) = (0, 0, 0);
        for &(p, g) in pairs {
            match (p.contains(a), g.contains(a)) {
                (true, true) => inter += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => {}
            }
        }
        per_attribute.insert(
            a,
            PairScore {
                dice: dice_counts(inter, inter + fp, inter + fneg),
                tversky: tversky_counts(inter, fp, fneg, params),
            },
        );
    }
    let mean_dice = per_attribute.values().map(|s| s.dice).sum::<f64>() / 5.0;
    let mean_tversky = per_attribute.values().map(|s| s.tversky).sum::<f64>() / 5.0;
    Ok(AttributeAlignment {
        per_attribute,
        mean_dice,
        mean_tversky,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSummary {
    pub n_samples: usize,
    pub sample_wise_mean_dice: f64,
    pub sample_wise_mean_tversky: f64,
    pub attribute_wise_mean_dice: f64,
    pub attribute_wise_mean_tversky: f64,
    pub per_attribute: BTreeMap<AttributeId, PairScore>,
}

pub fn alignment_summary(
    pairs: &[(AttrSet, AttrSet)],
    params: TverskyParams,
) -> Result<AlignmentSummary, MetricsError> {
    let (sd, st) = sample_wise_alignment(pairs, params)?;
    let attr = attribute_wise_alignment(pairs, params)?;
    Ok(AlignmentSummary {
        n_samples: pairs.len(),
        sample_wise_mean_dice: sd,
        sample_wise_mean_tversky: st,
        attribute_wise_mean_dice: attr.mean_dice,
        attribute_wise_mean_tversky: attr.mean_tversky,
        per_attribute: attr.per_attribute,
    })
}
