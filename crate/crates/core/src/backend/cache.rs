//! Content-addressed response cache.
//!
//! Entries live at `<dir>/<key[..2]>/<key>.json`. Writes go to a temp file in
//! the same directory and are renamed into place. An entry whose checksum
//! does not match is moved to `<dir>/quarantine/` and reported as a miss.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, BackendError, QueryRequest, QueryResponse, Role, SamplingParams, Usage};

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    model_id: String,
    text: String,
    usage: Option<Usage>,
    latency_ms: u64,
    checksum: String,
}

fn checksum(key: &str, model_id: &str, text: &str) -> String {
    let mut h = Sha256::new();
    for part in [key, model_id, text] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| BackendError::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Stable hash of everything that determines a response.
    pub fn key(model_id: &str, role: Role, image_ref: &str, prompt: &str, sampling: &SamplingParams) -> String {
        let image_digest = hex::encode(Sha256::digest(image_ref.as_bytes()));
        let mut h = Sha256::new();
        let role = role.to_string();
        let sampling = format!("t={:?};max={}", sampling.temperature, sampling.max_tokens);
        for part in [model_id, role.as_str(), image_digest.as_str(), prompt, sampling.as_str()] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("xx");
        self.dir.join(shard).join(format!("{key}.json"))
    }

    fn quarantine(&self, path: &Path, key: &str) {
        let qdir = self.dir.join("quarantine");
        let moved = fs::create_dir_all(&qdir).and_then(|_| fs::rename(path, qdir.join(format!("{key}.json"))));
        if let Err(e) = moved {
            log::warn!("could not quarantine {}: {e}", path.display());
        }
    }

    pub fn get(&self, key: &str) -> Result<Option<QueryResponse>, BackendError> {
        let path = self.path(key);
        let raw = match fs::read_to_string(&path) {
            Ok(r) => r,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(BackendError::io(&path, e)),
        };
        let entry = match serde_json::from_str::<Entry>(&raw) {
            Ok(e) if e.key == key && e.checksum == checksum(&e.key, &e.model_id, &e.text) => e,
            _ => {
                log::warn!("corrupt cache entry {}; quarantined", path.display());
                self.quarantine(&path, key);
                return Ok(None);
            }
        };
        Ok(Some(QueryResponse {
            text: entry.text,
            usage: entry.usage,
            latency_ms: entry.latency_ms,
            model_id: entry.model_id,
            cache_hit: true,
        }))
    }

    pub fn put(&self, key: &str, resp: &QueryResponse) -> Result<(), BackendError> {
        let path = self.path(key);
        let parent = path.parent().expect("entry path has a shard dir");
        fs::create_dir_all(parent).map_err(|e| BackendError::io(parent, e))?;
        let entry = Entry {
            key: key.to_string(),
            model_id: resp.model_id.clone(),
            text: resp.text.clone(),
            usage: resp.usage,
            latency_ms: resp.latency_ms,
            checksum: checksum(key, &resp.model_id, &resp.text),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| BackendError::io(parent, e))?;
        serde_json::to_writer(&mut tmp, &entry)
            .map_err(std::io::Error::from)
            .and_then(|_| tmp.flush())
            .map_err(|e| BackendError::io(tmp.path(), e))?;
        tmp.persist(&path).map_err(|e| BackendError::io(&path, e.error))?;
        Ok(())
    }
}

/// Serves repeated queries from a [`ResponseCache`]; only successful
/// responses are stored.
pub struct CachedBackend {
    inner: Arc<dyn Backend>,
    cache: Arc<ResponseCache>,
}

impl CachedBackend {
    pub fn new(inner: Arc<dyn Backend>, cache: Arc<ResponseCache>) -> Self {
        Self { inner, cache }
    }
}

impl Backend for CachedBackend {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn sampling(&self) -> &SamplingParams {
        self.inner.sampling()
    }

    fn query(&self, req: &QueryRequest) -> Result<QueryResponse, BackendError> {
        let key = ResponseCache::key(self.model_id(), req.role, &req.image_ref, &req.prompt, self.sampling());
        if let Some(hit) = self.cache.get(&key)? {
            return Ok(hit);
        }
        let resp = self.inner.query(req)?;
        self.cache.put(&key, &resp)?;
        Ok(resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AttributeId;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn resp(text: &str) -> QueryResponse {
        QueryResponse {
            text: text.into(),
            usage: Some(Usage {
                prompt_tokens: 3,
                completion_tokens: 4,
            }),
            latency_ms: 17,
            model_id: "m".into(),
            cache_hit: false,
        }
    }

    #[test]
    fn round_trip_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let c = ResponseCache::open(dir.path()).unwrap();
        let k = ResponseCache::key("m", Role::Final, "a.png", "prompt", &SamplingParams::default());
        assert_eq!(c.get(&k).unwrap(), None);
        let text = "Emotion: Calm\n\u{00e9}\t\"quoted\"";
        c.put(&k, &resp(text)).unwrap();
        let got = c.get(&k).unwrap().unwrap();
        assert_eq!(got.text, text);
        assert!(got.cache_hit);
        assert_eq!(got.usage, resp(text).usage);
    }

    #[test]
    fn key_depends_on_every_input() {
        let s = SamplingParams::default();
        let base = ResponseCache::key("m", Role::Final, "a.png", "p", &s);
        let hotter = SamplingParams {
            temperature: 0.7,
            ..s.clone()
        };
        assert_ne!(base, ResponseCache::key("m", Role::Final, "a.png", "p", &hotter));
        assert_ne!(base, ResponseCache::key("m2", Role::Final, "a.png", "p", &s));
        assert_ne!(base, ResponseCache::key("m", Role::Attribute(AttributeId::Color), "a.png", "p", &s));
        assert_ne!(base, ResponseCache::key("m", Role::Final, "b.png", "p", &s));
        assert_ne!(base, ResponseCache::key("m", Role::Final, "a.png", "p ", &s));
        assert_eq!(base, ResponseCache::key("m", Role::Final, "a.png", "p", &s));
    }

    #[test]
    fn corrupt_entry_is_quarantined() {
        let dir = tempfile::tempdir().unwrap();
        let c = ResponseCache::open(dir.path()).unwrap();
        let k = ResponseCache::key("m", Role::Final, "", "p", &SamplingParams::default());
        c.put(&k, &resp("original")).unwrap();
        let path = c.path(&k);
        let tampered = fs::read_to_string(&path).unwrap().replace("original", "tampered");
        fs::write(&path, tampered).unwrap();
        assert_eq!(c.get(&k).unwrap(), None);
        assert!(!path.exists());
        assert!(dir.path().join("quarantine").join(format!("{k}.json")).exists());

        fs::write(&path, "{not json").unwrap();
        assert_eq!(c.get(&k).unwrap(), None);
    }

    struct Counting(AtomicUsize, SamplingParams);

    impl Backend for Counting {
        fn model_id(&self) -> &str {
            "count"
        }
        fn sampling(&self) -> &SamplingParams {
            &self.1
        }
        fn query(&self, _: &QueryRequest) -> Result<QueryResponse, BackendError> {
            let n = self.0.fetch_add(1, Ordering::SeqCst);
            Ok(resp(&format!("answer {n}")))
        }
    }

    #[test]
    fn cached_backend_queries_once() {
        let dir = tempfile::tempdir().unwrap();
        let inner = Arc::new(Counting(AtomicUsize::new(0), SamplingParams::default()));
        let b = CachedBackend::new(inner.clone(), Arc::new(ResponseCache::open(dir.path()).unwrap()));
        let req = QueryRequest {
            request_id: "r".into(),
            artwork_id: "a".into(),
            image_ref: "i".into(),
            prompt: "p".into(),
            role: Role::Final,
        };
        let first = b.query(&req).unwrap();
        let second = b.query(&req).unwrap();
        assert!(!first.cache_hit && second.cache_hit);
        assert_eq!(first.text, second.text);
        assert_eq!(inner.0.load(Ordering::SeqCst), 1);
    }
}
