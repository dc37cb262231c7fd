//! Vision-language backends behind one blocking [`Backend`] trait.
//!
//! Three kinds exist: [`HttpBackend`] talks to a chat-completions endpoint,
//! [`FixtureBackend`] replays canned responses keyed by artwork and role,
//! and [`OracleBackend`] derives responses from gold labels with seeded
//! corruption. [`CachedBackend`] wraps any of them with the on-disk
//! [`ResponseCache`].

mod cache;
mod fixture;
mod http;
mod oracle;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{AttributeId, Dataset};

pub use cache::{CachedBackend, ResponseCache};
pub use fixture::FixtureBackend;
pub use http::{Backoff, HttpBackend, RateLimiter};
pub use oracle::{OracleBackend, OracleConfig};

pub const ENV_API_KEY: &str = "AGSR_API_KEY";
pub const ENV_API_BASE: &str = "AGSR_API_BASE";
pub const ENV_CACHE_DIR: &str = "AGSR_CACHE_DIR";

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("authentication rejected (HTTP {status})")]
    Auth { status: u16 },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("request rejected with HTTP {status}: {message}")]
    Rejected { status: u16, message: String },
    #[error("malformed upstream payload: {0}")]
    MalformedUpstream(String),
    #[error("no fixture response for artwork \"{artwork_id}\" role \"{role}\"")]
    FixtureMiss { artwork_id: String, role: String },
    #[error("unknown artwork \"{0}\"")]
    UnknownArtwork(String),
    #[error("no gold salience for artwork \"{0}\"")]
    MissingGold(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BackendError {
    /// Errors that make every further query pointless.
    pub fn is_fatal(&self) -> bool {
        matches!(self, BackendError::Auth { .. } | BackendError::Config(_))
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        BackendError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Single-stage prompting strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaselineMethod {
    Base,
    Cot,
    OneShot,
    /// A fine-tuned reasoning model prompted with the chain-of-thought template.
    CotSft,
}

impl BaselineMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMethod::Base => "base",
            BaselineMethod::Cot => "cot",
            BaselineMethod::OneShot => "one_shot",
            BaselineMethod::CotSft => "cot_sft",
        }
    }
}

/// Which agent a query is for. Serialized as `attribute:<name>`, `final` or
/// `baseline:<method>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Attribute(AttributeId),
    Final,
    Baseline(BaselineMethod),
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Attribute(a) => write!(f, "attribute:{a}"),
            Role::Final => f.write_str("final"),
            Role::Baseline(m) => write!(f, "baseline:{}", m.as_str()),
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "final" {
            return Ok(Role::Final);
        }
        if let Some(a) = s.strip_prefix("attribute:") {
            return a.parse().map(Role::Attribute).map_err(|e| e.to_string());
        }
        match s.strip_prefix("baseline:") {
            Some("base") => Ok(Role::Baseline(BaselineMethod::Base)),
            Some("cot") => Ok(Role::Baseline(BaselineMethod::Cot)),
            Some("one_shot") => Ok(Role::Baseline(BaselineMethod::OneShot)),
            Some("cot_sft") => Ok(Role::Baseline(BaselineMethod::CotSft)),
            _ => Err(format!("unknown role \"{s}\"")),
        }
    }
}

impl Serialize for Role {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Role {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Fixture,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingParams {
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_max_tokens() -> u32 {
    512
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: default_max_tokens(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// Falls back to `AGSR_API_BASE`.
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_retries() -> u32 {
    4
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: None,
            timeout_ms: default_timeout_ms(),
            max_retries: default_retries(),
        }
    }
}

/// Identity and parameters of one model endpoint or simulated backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSpec {
    pub kind: BackendKind,
    pub model_id: String,
    #[serde(default)]
    pub sampling: SamplingParams,
    #[serde(default)]
    pub endpoint: Option<EndpointConfig>,
    /// JSON-lines file of `{artwork_id, role, text}`.
    #[serde(default)]
    pub fixture: Option<PathBuf>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
}

impl BackendSpec {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.model_id.trim().is_empty() {
            return Err(BackendError::Config("model_id is empty".into()));
        }
        match self.kind {
            BackendKind::Fixture if self.fixture.is_none() => {
                Err(BackendError::Config("fixture backend needs `fixture`".into()))
            }
            BackendKind::Oracle => match &self.oracle {
                None => Err(BackendError::Config("oracle backend needs `oracle`".into())),
                Some(o) => o.validate(),
            },
            BackendKind::Http => match &self.endpoint {
                Some(e) if e.timeout_ms == 0 => Err(BackendError::Config("timeout_ms must be > 0".into())),
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub request_id: String,
    pub artwork_id: String,
    pub image_ref: String,
    pub prompt: String,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub text: String,
    #[serde(default)]
    pub usage: Option<Usage>,
    pub latency_ms: u64,
    pub model_id: String,
    #[serde(default)]
    pub cache_hit: bool,
}

pub trait Backend: Send + Sync {
    fn model_id(&self) -> &str;

    fn sampling(&self) -> &SamplingParams;

    fn query(&self, req: &QueryRequest) -> Result<QueryResponse, BackendError>;
}

/// Builds a backend from its spec. Relative fixture paths resolve against
/// `base_dir`; oracle backends read gold labels from `dataset`.
pub fn build_backend(
    spec: &BackendSpec,
    base_dir: &Path,
    dataset: &Arc<Dataset>,
    rate_limiter: Option<Arc<RateLimiter>>,
) -> Result<Arc<dyn Backend>, BackendError> {
    spec.validate()?;
    Ok(match spec.kind {
        BackendKind::Fixture => {
            let path = spec.fixture.as_ref().expect("validated");
            let path = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
            Arc::new(FixtureBackend::load(&path, &spec.model_id, spec.sampling.clone())?)
        }
        BackendKind::Oracle => Arc::new(OracleBackend::new(
            spec.oracle.clone().expect("validated"),
            &spec.model_id,
            spec.sampling.clone(),
            Arc::clone(dataset),
        )),
        BackendKind::Http => Arc::new(HttpBackend::from_env(
            &spec.model_id,
            spec.sampling.clone(),
            spec.endpoint.clone().unwrap_or_default(),
            rate_limiter,
        )?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn role_round_trip() {
        let roles = AttributeId::ALL
            .into_iter()
            .map(Role::Attribute)
            .chain([Role::Final])
            .chain(
                [BaselineMethod::Base, BaselineMethod::Cot, BaselineMethod::OneShot, BaselineMethod::CotSft]
                    .map(Role::Baseline),
            );
        for r in roles {
            let s = r.to_string();
            assert_eq!(s.parse::<Role>().unwrap(), r);
            let j = serde_json::to_string(&r).unwrap();
            assert_eq!(serde_json::from_str::<Role>(&j).unwrap(), r);
        }
        assert_eq!(Role::Attribute(AttributeId::Color).to_string(), "attribute:color");
        assert!("attribute:texture".parse::<Role>().is_err());
    }

    #[test]
    fn spec_validation() {
        let spec: BackendSpec = toml::from_str("kind = \"fixture\"\nmodel_id = \"m\"").unwrap();
        assert!(spec.validate().is_err());
        let spec: BackendSpec =
            toml::from_str("kind = \"http\"\nmodel_id = \"m\"\n[endpoint]\ntimeout_ms = 0").unwrap();
        assert!(spec.validate().is_err());
        assert!(toml::from_str::<BackendSpec>("kind = \"http\"\nmodel_id = \"m\"\nbogus = 1").is_err());
    }
}
