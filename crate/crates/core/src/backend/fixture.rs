use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use super::{Backend, BackendError, QueryRequest, QueryResponse, Role, SamplingParams};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureLine {
    artwork_id: String,
    role: Role,
    text: String,
}

/// Replays canned responses verbatim, keyed by `(artwork_id, role)`.
pub struct FixtureBackend {
    model_id: String,
    sampling: SamplingParams,
    responses: HashMap<(String, Role), String>,
}

impl FixtureBackend {
    pub fn new(
        model_id: &str,
        sampling: SamplingParams,
        responses: impl IntoIterator<Item = (String, Role, String)>,
    ) -> Self {
        Self {
            model_id: model_id.to_string(),
            sampling,
            responses: responses.into_iter().map(|(a, r, t)| ((a, r), t)).collect(),
        }
    }

    pub fn load(path: &Path, model_id: &str, sampling: SamplingParams) -> Result<Self, BackendError> {
        let file = File::open(path).map_err(|e| BackendError::io(path, e))?;
        let mut responses = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| BackendError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: FixtureLine = serde_json::from_str(&line).map_err(|e| {
                BackendError::Config(format!("{}:{}: {e}", path.display(), i + 1))
            })?;
            let key = (f.artwork_id, f.role);
            if responses.contains_key(&key) {
                return Err(BackendError::Config(format!(
                    "{}:{}: duplicate fixture for artwork \"{}\" role \"{}\"",
                    path.display(),
                    i + 1,
                    key.0,
                    key.1
                )));
            }
            responses.insert(key, f.text);
        }
        Ok(Self {
            model_id: model_id.to_string(),
            sampling,
            responses,
        })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Backend for FixtureBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn sampling(&self) -> &SamplingParams {
        &self.sampling
    }

    fn query(&self, req: &QueryRequest) -> Result<QueryResponse, BackendError> {
        let text = self
            .responses
            .get(&(req.artwork_id.clone(), req.role))
            .ok_or_else(|| BackendError::FixtureMiss {
                artwork_id: req.artwork_id.clone(),
                role: req.role.to_string(),
            })?;
        Ok(QueryResponse {
            text: text.clone(),
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
    use crate::corpus::AttributeId;
    use std::io::Write;

    fn req(artwork: &str, role: Role) -> QueryRequest {
        QueryRequest {
            request_id: "r".into(),
            artwork_id: artwork.into(),
            image_ref: "x.png".into(),
            prompt: "p".into(),
            role,
        }
    }

    #[test]
    fn lookup_and_miss() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"artwork_id":"a1","role":"attribute:color","text":"{{\"salient\": true}}"}}"#).unwrap();
        writeln!(f, r#"{{"artwork_id":"a1","role":"final","text":"Emotion: Calm"}}"#).unwrap();
        let b = FixtureBackend::load(f.path(), "fx", SamplingParams::default()).unwrap();
        assert_eq!(b.len(), 2);
        let r = b.query(&req("a1", Role::Attribute(AttributeId::Color))).unwrap();
        assert_eq!(r.text, r#"{"salient": true}"#);
        let err = b.query(&req("a2", Role::Final)).unwrap_err();
        assert!(matches!(err, BackendError::FixtureMiss { .. }));
    }

    #[test]
    fn duplicate_key_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"artwork_id":"a1","role":"final","text":"x"}}"#).unwrap();
        writeln!(f, r#"{{"artwork_id":"a1","role":"final","text":"y"}}"#).unwrap();
        assert!(matches!(
            FixtureBackend::load(f.path(), "fx", SamplingParams::default()),
            Err(BackendError::Config(_))
        ));
    }
}
