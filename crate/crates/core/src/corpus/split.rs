use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, Dataset};

/// Deterministically partitions a dataset into disjoint splits.
///
/// Split sizes use largest-remainder rounding of `ratio * len`; records keep
/// their original relative order inside each split.
pub fn split_dataset(dataset: &Dataset, ratios: &[f64], seed: u64) -> Result<Vec<Dataset>, CorpusError> {
    if ratios.is_empty() {
        return Err(CorpusError::BadRatios("no ratios given".into()));
    }
    if let Some(r) = ratios.iter().find(|r| !r.is_finite() || **r <= 0.0) {
        return Err(CorpusError::BadRatios(format!("ratio {r} is not positive")));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadRatios(format!("ratios sum to {total}, expected 1")));
    }

    let n = dataset.len();
    let mut sizes: Vec<usize> = ratios.iter().map(|r| (r * n as f64).floor() as usize).collect();
    let mut leftover = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = ratios[a] * n as f64 - sizes[a] as f64;
        let fb = ratios[b] * n as f64 - sizes[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        sizes[i] += 1;
        leftover -= 1;
    }

    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut out = Vec::with_capacity(ratios.len());
    let mut start = 0;
    for (k, size) in sizes.into_iter().enumerate() {
        let mut chunk = indices[start..start + size].to_vec();
        start += size;
        chunk.sort_unstable();
        let artworks: Vec<_> = chunk.iter().map(|&i| dataset.artworks()[i].clone()).collect();
        let gold = dataset.gold_salience_map().map(|g| {
            artworks
                .iter()
                .filter_map(|a| g.get(&a.id).map(|s| (a.id.clone(), *s)))
                .collect::<BTreeMap<_, _>>()
        });
        let annotations = dataset
            .annotations()
            .iter()
            .filter(|a| artworks.iter().any(|r| r.id == a.artwork_id))
            .cloned()
            .collect();
        let part = Dataset::new(
            format!("{}[{k}]", dataset.name()),
            dataset.source().map(str::to_string),
            dataset.vocabulary().clone(),
            artworks,
            gold,
        )?
        .with_annotations(annotations)
        .with_mapping(dataset.mapping().cloned());
        out.push(part);
    }
    Ok(out)
}
