use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    AffectLabels, Arousal, ArtworkRecord, Dataset, EmotionVocabulary, SalienceVector, Source, Valence,
};

pub const LABELS: [&str; 12] = [
    "Excited", "Happy", "Pleased", "Contentment", "Calm", "Relaxed", "Sad", "Depressed", "Bored", "Tense",
    "Angry", "Afraid",
];

pub fn vocab() -> EmotionVocabulary {
    EmotionVocabulary::new(LABELS.map(String::from).to_vec(), BTreeMap::new()).unwrap()
}

/// `n` artworks with random gold affect and gold supports of size at most 2.
pub fn dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gold = BTreeMap::new();
    let artworks = (0..n)
        .map(|i| {
            let id = format!("syn{i:04}");
            let mut s = [false; 5];
            for _ in 0..rng.random_range(0..=2) {
                s[rng.random_range(0..5)] = true;
            }
            gold.insert(id.clone(), SalienceVector::new(s));
            ArtworkRecord {
                id,
                image_ref: format!("images/{i}.png"),
                source: Source::Other,
                style: None,
                content: None,
                attribute_descriptions: BTreeMap::new(),
                gold_affect: Some(AffectLabels {
                    emotion: LABELS[rng.random_range(0..LABELS.len())].to_string(),
                    arousal: if rng.random() { Arousal::High } else { Arousal::Low },
                    valence: if rng.random() { Valence::Positive } else { Valence::Negative },
                }),
                unmapped_emotion: None,
                extra: Default::default(),
            }
        })
        .collect();
    Dataset::new("synthetic", None, vocab(), artworks, Some(gold)).unwrap()
}
