//! Gold-derived responses with seeded, per-decision corruption.
//!
//! Every random draw comes from its own ChaCha8 stream keyed by
//! `(seed, artwork_id, decision)`, so a response does not depend on query
//! order, concurrency or which other artworks are in the run.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, BackendError, QueryRequest, QueryResponse, Role, SamplingParams};
use crate::corpus::{AffectLabels, Arousal, AttributeId, Dataset, Valence};
use crate::metrics::AttrSet;

const DEFAULT_TEMPLATE: &str = "The work reads as {emotion}, with {arousal} arousal and {valence} valence.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Probability of flipping each gold salience decision.
    #[serde(default)]
    pub flip_probability: f64,
    /// Per-attribute overrides of `flip_probability`.
    #[serde(default)]
    pub per_attribute: BTreeMap<AttributeId, f64>,
    /// Probability of replacing each gold affect label with a wrong one.
    #[serde(default)]
    pub label_corruption: f64,
    /// Defaults to the run seed when omitted.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Placeholders: `{emotion}`, `{arousal}`, `{valence}`, `{attributes}`.
    #[serde(default)]
    pub explanation_template: Option<String>,
}

impl OracleConfig {
    pub fn zero_noise(seed: u64) -> Self {
        Self {
            flip_probability: 0.0,
            per_attribute: BTreeMap::new(),
            label_corruption: 0.0,
            seed: Some(seed),
            explanation_template: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let probs = [self.flip_probability, self.label_corruption]
            .into_iter()
            .chain(self.per_attribute.values().copied());
        for p in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(BackendError::Config(format!("probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn flip_for(&self, a: AttributeId) -> f64 {
        self.per_attribute.get(&a).copied().unwrap_or(self.flip_probability)
    }
}

#[derive(Serialize)]
struct SalienceOut {
    salient: bool,
}

#[derive(Serialize)]
struct FinalOut<'a> {
    emotion: &'a str,
    arousal: Arousal,
    valence: Valence,
    explanation: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    salient_attributes: Option<AttrSet>,
}

pub struct OracleBackend {
    cfg: OracleConfig,
    model_id: String,
    sampling: SamplingParams,
    gold: Arc<Dataset>,
}

impl OracleBackend {
    pub fn new(cfg: OracleConfig, model_id: &str, sampling: SamplingParams, gold: Arc<Dataset>) -> Self {
        Self {
            cfg,
            model_id: model_id.to_string(),
            sampling,
            gold,
        }
    }

    fn stream(&self, artwork_id: &str, key: &str) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(b"agsr-oracle\0");
        h.update(self.cfg.seed.unwrap_or(0).to_le_bytes());
        h.update(artwork_id.as_bytes());
        h.update([0]);
        h.update(key.as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }

    fn flip(&self, artwork_id: &str, key: &str, p: f64) -> bool {
        p > 0.0 && self.stream(artwork_id, key).random::<f64>() < p
    }

    fn noisy_support(&self, artwork_id: &str, prefix: &str) -> AttrSet {
        let gold = self
            .gold
            .gold_salience(artwork_id)
            .map(|s| s.support())
            .unwrap_or_default();
        AttributeId::ALL
            .into_iter()
            .filter(|&a| gold.contains(a) != self.flip(artwork_id, &format!("{prefix}:{a}"), self.cfg.flip_for(a)))
            .collect()
    }

    fn affect(&self, artwork_id: &str, gold: Option<&AffectLabels>) -> (String, Arousal, Valence) {
        let labels = self.gold.vocabulary().labels();
        let q = self.cfg.label_corruption;
        let Some(g) = gold else {
            let mut rng = self.stream(artwork_id, "affect:ungrounded");
            let emotion = labels[rng.random_range(0..labels.len())].clone();
            let arousal = if rng.random() { Arousal::High } else { Arousal::Low };
            let valence = if rng.random() { Valence::Positive } else { Valence::Negative };
            return (emotion, arousal, valence);
        };
        let mut rng = self.stream(artwork_id, "emotion");
        let emotion = if labels.len() > 1 && rng.random::<f64>() < q {
            let gold_idx = labels.iter().position(|l| *l == g.emotion);
            let others: Vec<&String> = labels
                .iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != gold_idx)
                .map(|(_, l)| l)
                .collect();
            others[rng.random_range(0..others.len())].clone()
        } else {
            g.emotion.clone()
        };
        let arousal = if self.flip(artwork_id, "arousal", q) { g.arousal.other() } else { g.arousal };
        let valence = if self.flip(artwork_id, "valence", q) { g.valence.other() } else { g.valence };
        (emotion, arousal, valence)
    }

    fn explanation(&self, emotion: &str, arousal: Arousal, valence: Valence, attrs: Option<AttrSet>) -> String {
        let template = self.cfg.explanation_template.as_deref().unwrap_or(DEFAULT_TEMPLATE);
        let attrs = match attrs {
            Some(s) if !s.is_empty() => s.names().join(", "),
            _ => "none".to_string(),
        };
        template
            .replace("{emotion}", &emotion.to_lowercase())
            .replace("{arousal}", arousal.as_str())
            .replace("{valence}", valence.as_str())
            .replace("{attributes}", &attrs)
    }

    pub fn respond(&self, req: &QueryRequest) -> Result<String, BackendError> {
        let id = req.artwork_id.as_str();
        let artwork = self
            .gold
            .get(id)
            .ok_or_else(|| BackendError::UnknownArtwork(id.to_string()))?;
        let text = match req.role {
            Role::Attribute(a) => {
                let gold = self
                    .gold
                    .gold_salience(id)
                    .ok_or_else(|| BackendError::MissingGold(id.to_string()))?;
                let salient = gold.get(a) != self.flip(id, &format!("salience:{a}"), self.cfg.flip_for(a));
                serde_json::to_string(&SalienceOut { salient })
            }
            Role::Final | Role::Baseline(_) => {
                let (emotion, arousal, valence) = self.affect(id, artwork.gold_affect.as_ref());
                let attrs = matches!(req.role, Role::Baseline(_)).then(|| self.noisy_support(id, "baseline"));
                serde_json::to_string(&FinalOut {
                    explanation: self.explanation(&emotion, arousal, valence, attrs),
                    emotion: &emotion,
                    arousal,
                    valence,
                    salient_attributes: attrs,
                })
            }
        };
        Ok(text.expect("plain struct serializes"))
    }
}

impl Backend for OracleBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn sampling(&self) -> &SamplingParams {
        &self.sampling
    }

    fn query(&self, req: &QueryRequest) -> Result<QueryResponse, BackendError> {
        Ok(QueryResponse {
            text: self.respond(req)?,
            usage: None,
            latency_ms: 0,
            model_id: self.model_id.clone(),
            cache_hit: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::BaselineMethod;
    use crate::parse::{parse_final_response, parse_salience_response};
    use crate::testutil;

    fn req(id: &str, role: Role) -> QueryRequest {
        QueryRequest {
            request_id: format!("{id}/{role}"),
            artwork_id: id.into(),
            image_ref: String::new(),
            prompt: "p".into(),
            role,
        }
    }

    fn oracle(cfg: OracleConfig, ds: &Arc<Dataset>) -> OracleBackend {
        OracleBackend::new(cfg, "oracle", SamplingParams::default(), Arc::clone(ds))
    }

    #[test]
    fn zero_noise_reproduces_gold() {
        let ds = Arc::new(testutil::dataset(40, 3));
        let o = oracle(OracleConfig::zero_noise(9), &ds);
        for art in ds.artworks() {
            let gold = ds.gold_salience(&art.id).unwrap();
            for a in AttributeId::ALL {
                let text = o.respond(&req(&art.id, Role::Attribute(a))).unwrap();
                assert_eq!(parse_salience_response(&text, a).unwrap().salient, gold.get(a));
            }
            let text = o.respond(&req(&art.id, Role::Final)).unwrap();
            let p = parse_final_response(&text, ds.vocabulary()).unwrap();
            let g = art.gold_affect.as_ref().unwrap();
            assert_eq!((p.emotion.as_str(), p.arousal, p.valence), (g.emotion.as_str(), g.arousal, g.valence));
            assert_eq!(p.salient_attributes, None);
            let text = o.respond(&req(&art.id, Role::Baseline(BaselineMethod::Cot))).unwrap();
            let p = parse_final_response(&text, ds.vocabulary()).unwrap();
            assert_eq!(p.salient_attributes, Some(gold.support()));
        }
    }

    #[test]
    fn deterministic_across_instances_and_order() {
        let ds = Arc::new(testutil::dataset(20, 1));
        let cfg = OracleConfig {
            flip_probability: 0.3,
            label_corruption: 0.4,
            ..OracleConfig::zero_noise(5)
        };
        let a = oracle(cfg.clone(), &ds);
        let b = oracle(cfg, &ds);
        let forward: Vec<String> = ds
            .artworks()
            .iter()
            .map(|r| a.respond(&req(&r.id, Role::Final)).unwrap())
            .collect();
        let mut backward: Vec<String> = ds
            .artworks()
            .iter()
            .rev()
            .map(|r| b.respond(&req(&r.id, Role::Final)).unwrap())
            .collect();
        backward.reverse();
        assert_eq!(forward, backward);
    }

    #[test]
    fn flip_rate_matches_probability() {
        let ds = Arc::new(testutil::dataset(1000, 11));
        let cfg = OracleConfig {
            flip_probability: 0.1,
            ..OracleConfig::zero_noise(2024)
        };
        let o = oracle(cfg, &ds);
        for a in AttributeId::ALL {
            let flips = ds
                .artworks()
                .iter()
                .filter(|r| {
                    let text = o.respond(&req(&r.id, Role::Attribute(a))).unwrap();
                    parse_salience_response(&text, a).unwrap().salient != ds.gold_salience(&r.id).unwrap().get(a)
                })
                .count();
            let rate = flips as f64 / 1000.0;
            assert!((rate - 0.1).abs() <= 0.03, "{a}: {rate}");
        }
    }

    #[test]
    fn corrupted_labels_are_wrong_and_valid() {
        let ds = Arc::new(testutil::dataset(50, 4));
        let cfg = OracleConfig {
            label_corruption: 1.0,
            ..OracleConfig::zero_noise(1)
        };
        let o = oracle(cfg, &ds);
        for r in ds.artworks() {
            let p = parse_final_response(&o.respond(&req(&r.id, Role::Final)).unwrap(), ds.vocabulary()).unwrap();
            let g = r.gold_affect.as_ref().unwrap();
            assert_ne!(p.emotion, g.emotion);
            assert_ne!(p.arousal, g.arousal);
            assert_ne!(p.valence, g.valence);
        }
    }

    #[test]
    fn unknown_artwork_and_bad_config() {
        let ds = Arc::new(testutil::dataset(2, 0));
        let o = oracle(OracleConfig::zero_noise(0), &ds);
        assert!(matches!(o.respond(&req("nope", Role::Final)), Err(BackendError::UnknownArtwork(_))));
        let bad = OracleConfig {
            flip_probability: 1.5,
            ..OracleConfig::zero_noise(0)
        };
        assert!(bad.validate().is_err());
    }
}
