//! TOML run configuration.
//!
//! ```toml
//! [dataset]
//! manifest = "data/manifest.json"
//!
//! [condition]
//! name = "fabg"               # base | cot | one_shot | cot_sft_backend | fabg
//! salience_source = "predicted"  # predicted | gold (fabg only)
//!
//! [backends.attribute]        # shared by the five attribute agents
//! kind = "oracle"
//! model_id = "oracle"
//! oracle = { flip_probability = 0.1 }
//!
//! [backends.final]
//! kind = "http"
//! model_id = "qwen3-vl-8b"
//!
//! [limits]
//! concurrency = 4
//! requests_per_minute = 120
//!
//! [run]
//! seed = 7
//! ```
//!
//! A single attribute agent can be overridden with `[backends.color]` etc.
//! Relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::prompts::PromptPaths;
use crate::backend::{BackendSpec, BaselineMethod};
use crate::corpus::AttributeId;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config key `{key}`: {message}")]
    Key { key: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Base,
    Cot,
    OneShot,
    /// A chain-of-thought fine-tuned model, queried single-stage.
    CotSftBackend,
    Fabg,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Base => "base",
            Condition::Cot => "cot",
            Condition::OneShot => "one_shot",
            Condition::CotSftBackend => "cot_sft_backend",
            Condition::Fabg => "fabg",
        }
    }

    pub fn baseline_method(self) -> Option<BaselineMethod> {
        match self {
            Condition::Base => Some(BaselineMethod::Base),
            Condition::Cot => Some(BaselineMethod::Cot),
            Condition::OneShot => Some(BaselineMethod::OneShot),
            Condition::CotSftBackend => Some(BaselineMethod::CotSft),
            Condition::Fabg => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SalienceSource {
    #[default]
    Predicted,
    Gold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub manifest: PathBuf,
    /// Run only the first `limit` artworks.
    #[serde(default)]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSection {
    pub name: Condition,
    #[serde(default)]
    pub salience_source: SalienceSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    /// 0 disables the throttle.
    #[serde(default)]
    pub requests_per_minute: u32,
}

fn default_concurrency() -> usize {
    4
}

impl Default for LimitsSection {
    fn default() -> Self {
        Self {
            concurrency: default_concurrency(),
            requests_per_minute: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    /// Falls back to `AGSR_CACHE_DIR`; no caching when neither is set.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    pub condition: ConditionSection,
    pub backends: BTreeMap<String, BackendSpec>,
    #[serde(default)]
    pub prompts: PromptPaths,
    #[serde(default)]
    pub limits: LimitsSection,
    #[serde(default)]
    pub run: RunSection,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

const BACKEND_KEYS: &[&str] = &["attribute", "final", "color", "composition", "line", "light", "brushstroke"];

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            ConfigError::Key {
                key: if key == "." { "<root>".into() } else { key },
                message: e.into_inner().message().trim().to_string(),
            }
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(k) = self.backends.keys().find(|k| !BACKEND_KEYS.contains(&k.as_str())) {
            return Err(ConfigError::Key {
                key: format!("backends.{k}"),
                message: format!("unknown backend role; expected one of {}", BACKEND_KEYS.join(", ")),
            });
        }
        if self.limits.concurrency == 0 {
            return Err(ConfigError::Key {
                key: "limits.concurrency".into(),
                message: "must be at least 1".into(),
            });
        }
        let fabg = self.condition.name == Condition::Fabg;
        if !fabg && self.condition.salience_source == SalienceSource::Gold {
            return Err(ConfigError::Key {
                key: "condition.salience_source".into(),
                message: "gold salience applies only to the fabg condition".into(),
            });
        }
        if !self.backends.contains_key("final") {
            return Err(ConfigError::Key {
                key: "backends.final".into(),
                message: "missing".into(),
            });
        }
        if fabg && self.condition.salience_source == SalienceSource::Predicted {
            for a in AttributeId::ALL {
                if self.attribute_backend(a).is_none() {
                    return Err(ConfigError::Key {
                        key: format!("backends.{a}"),
                        message: "no backend for this attribute agent and no [backends.attribute] default".into(),
                    });
                }
            }
        }
        for (k, spec) in &self.backends {
            spec.validate().map_err(|e| ConfigError::Key {
                key: format!("backends.{k}"),
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn attribute_backend(&self, a: AttributeId) -> Option<(&str, &BackendSpec)> {
        self.backends
            .get_key_value(a.name())
            .or_else(|| self.backends.get_key_value("attribute"))
            .map(|(k, v)| (k.as_str(), v))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Digest over everything that can change record content. Limits and
    /// the cache location are excluded.
    pub fn digest(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("limits");
            if let Some(run) = o.get_mut("run").and_then(|r| r.as_object_mut()) {
                run.remove("cache_dir");
            }
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FABG: &str = r#"
[dataset]
manifest = "m.json"

[condition]
name = "fabg"

[backends.attribute]
kind = "oracle"
model_id = "o"
oracle = { flip_probability = 0.1 }

[backends.final]
kind = "oracle"
model_id = "o"
oracle = {}
"#;

    #[test]
    fn parses_minimal_fabg() {
        let c = RunConfig::from_toml(FABG, Path::new("/cfg")).unwrap();
        assert_eq!(c.condition.name, Condition::Fabg);
        assert_eq!(c.condition.salience_source, SalienceSource::Predicted);
        assert_eq!(c.limits.concurrency, 4);
        assert_eq!(c.resolve(&c.dataset.manifest), PathBuf::from("/cfg/m.json"));
        assert_eq!(c.attribute_backend(AttributeId::Light).unwrap().0, "attribute");
    }

    #[test]
    fn unknown_key_reports_path() {
        let text = FABG.replace("flip_probability", "flip_prob");
        match RunConfig::from_toml(&text, Path::new(".")) {
            Err(ConfigError::Key { key, message }) => {
                assert_eq!(key, "backends.attribute.oracle.flip_prob");
                assert!(message.contains("flip_prob"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let text = FABG.replace("[condition]\nname = \"fabg\"", "[condition]\nname = \"fabg\"\nsalience = 1");
        assert!(matches!(
            RunConfig::from_toml(&text, Path::new(".")),
            Err(ConfigError::Key { key, .. }) if key == "condition.salience"
        ));
    }

    #[test]
    fn structural_checks() {
        let no_attr = FABG.replace("[backends.attribute]", "[backends.color]");
        assert!(matches!(
            RunConfig::from_toml(&no_attr, Path::new(".")),
            Err(ConfigError::Key { key, .. }) if key == "backends.composition"
        ));
        let gold_base = FABG
            .replace("name = \"fabg\"", "name = \"base\"\nsalience_source = \"gold\"");
        assert!(RunConfig::from_toml(&gold_base, Path::new(".")).is_err());
        let bad_role = FABG.replace("[backends.final]", "[backends.texture]");
        assert!(matches!(
            RunConfig::from_toml(&bad_role, Path::new(".")),
            Err(ConfigError::Key { key, .. }) if key == "backends.texture"
        ));
    }

    #[test]
    fn digest_ignores_limits() {
        let a = RunConfig::from_toml(FABG, Path::new(".")).unwrap();
        let mut b = a.clone();
        b.limits.concurrency = 16;
        assert_eq!(a.digest(), b.digest());
        b.run.seed = 1;
        assert_ne!(a.digest(), b.digest());
    }
}
