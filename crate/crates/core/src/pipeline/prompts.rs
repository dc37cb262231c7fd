//! Prompt construction for every agent role, plus the bottleneck audit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::template::{Template, TemplateError};
use crate::backend::BaselineMethod;
use crate::corpus::{AttributeId, EmotionVocabulary};
use crate::metrics::AttrSet;

const ATTRIBUTE: &str = include_str!("../../prompts/attribute.txt");
const FINAL: &str = include_str!("../../prompts/final.txt");
const FINAL_EMPTY: &str = include_str!("../../prompts/final_empty.txt");
const BASE: &str = include_str!("../../prompts/base.txt");
const COT: &str = include_str!("../../prompts/cot.txt");
const ONE_SHOT: &str = include_str!("../../prompts/one_shot.txt");
const DEMONSTRATION: &str = include_str!("../../prompts/demonstration.txt");

/// Optional file overrides for the built-in templates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptPaths {
    pub attribute: Option<PathBuf>,
    #[serde(rename = "final")]
    pub final_: Option<PathBuf>,
    pub final_empty: Option<PathBuf>,
    pub base: Option<PathBuf>,
    pub cot: Option<PathBuf>,
    pub one_shot: Option<PathBuf>,
    pub demonstration: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct PromptTemplateSet {
    attribute: Template,
    final_: Template,
    final_empty: Template,
    base: Template,
    cot: Template,
    one_shot: Template,
    demonstration: String,
    demonstration_digest: String,
}

fn pick(id: &str, builtin: &str, path: &Option<PathBuf>, base_dir: &Path) -> Result<Template, TemplateError> {
    match path {
        Some(p) if p.is_absolute() => Template::load(id, p),
        Some(p) => Template::load(id, &base_dir.join(p)),
        None => Template::new(id, builtin),
    }
}

impl PromptTemplateSet {
    pub fn builtin() -> Self {
        Self::load(&PromptPaths::default(), Path::new(".")).expect("built-in templates are valid")
    }

    pub fn load(paths: &PromptPaths, base_dir: &Path) -> Result<Self, TemplateError> {
        let set = Self {
            attribute: pick("attribute", ATTRIBUTE, &paths.attribute, base_dir)?,
            final_: pick("final", FINAL, &paths.final_, base_dir)?,
            final_empty: pick("final_empty", FINAL_EMPTY, &paths.final_empty, base_dir)?,
            base: pick("base", BASE, &paths.base, base_dir)?,
            cot: pick("cot", COT, &paths.cot, base_dir)?,
            one_shot: pick("one_shot", ONE_SHOT, &paths.one_shot, base_dir)?,
            demonstration: match &paths.demonstration {
                Some(p) => {
                    let p = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
                    std::fs::read_to_string(&p).map_err(|e| TemplateError::Io {
                        template: "demonstration".into(),
                        message: format!("{}: {e}", p.display()),
                    })?
                }
                None => DEMONSTRATION.to_string(),
            },
            demonstration_digest: String::new(),
        };
        set.attribute.check_placeholders(&["attribute", "attribute_definition"])?;
        set.final_.check_placeholders(&["salient_attributes", "emotion_vocab"])?;
        set.final_empty.check_placeholders(&["emotion_vocab"])?;
        let baseline_vars = ["emotion_vocab", "attribute_names", "attribute_catalog", "demonstration"];
        for t in [&set.base, &set.cot, &set.one_shot] {
            t.check_placeholders(&baseline_vars)?;
        }
        let demonstration_digest = hex::encode(Sha256::digest(set.demonstration.as_bytes()));
        Ok(Self {
            demonstration_digest,
            ..set
        })
    }

    /// Template id to content digest, for the run manifest.
    pub fn digests(&self) -> BTreeMap<String, String> {
        let mut out: BTreeMap<String, String> = [
            &self.attribute,
            &self.final_,
            &self.final_empty,
            &self.base,
            &self.cot,
            &self.one_shot,
        ]
        .into_iter()
        .map(|t| (t.id.clone(), t.digest.clone()))
        .collect();
        out.insert("demonstration".into(), self.demonstration_digest.clone());
        out
    }

    pub fn attribute_prompt(&self, a: AttributeId) -> Result<String, TemplateError> {
        let vars = BTreeMap::from([
            ("attribute", a.name().to_string()),
            ("attribute_definition", a.definition().to_string()),
        ]);
        self.attribute.render(&vars)
    }

    /// Renders the final-stage prompt for `support` without auditing it.
    pub fn render_final(&self, support: AttrSet, vocab: &EmotionVocabulary) -> Result<String, TemplateError> {
        let emotion_vocab = vocab.labels().join(", ");
        if support.is_empty() {
            return self.final_empty.render(&BTreeMap::from([("emotion_vocab", emotion_vocab)]));
        }
        let cues = support
            .iter()
            .map(|a| format!("- {}: {}", a.name(), a.definition()))
            .collect::<Vec<_>>()
            .join("\n");
        self.final_.render(&BTreeMap::from([
            ("salient_attributes", cues),
            ("emotion_vocab", emotion_vocab),
        ]))
    }

    /// Final-stage prompt naming only the attributes in `support`.
    ///
    /// Fails with [`TemplateError::Exclusivity`] if the rendered text mentions
    /// any attribute outside the support, whatever its source.
    pub fn bottleneck_prompt(&self, support: AttrSet, vocab: &EmotionVocabulary) -> Result<String, TemplateError> {
        let prompt = self.render_final(support, vocab)?;
        let leaked = audit_exclusivity(&prompt, support);
        if !leaked.is_empty() {
            return Err(TemplateError::Exclusivity {
                names: leaked.iter().map(|a| a.name().to_string()).collect(),
            });
        }
        Ok(prompt)
    }

    pub fn baseline_prompt(&self, method: BaselineMethod, vocab: &EmotionVocabulary) -> Result<String, TemplateError> {
        let catalog = AttributeId::ALL
            .iter()
            .map(|a| format!("- {}: {}", a.name(), a.definition()))
            .collect::<Vec<_>>()
            .join("\n");
        let names = AttributeId::ALL.map(AttributeId::name).join(", ");
        let vars = BTreeMap::from([
            ("emotion_vocab", vocab.labels().join(", ")),
            ("attribute_names", names),
            ("attribute_catalog", catalog),
            ("demonstration", self.demonstration.trim_end().to_string()),
        ]);
        match method {
            BaselineMethod::Base => self.base.render(&vars),
            BaselineMethod::Cot | BaselineMethod::CotSft => self.cot.render(&vars),
            BaselineMethod::OneShot => self.one_shot.render(&vars),
        }
    }
}

/// Attributes outside `support` whose name occurs anywhere in `prompt`,
/// compared case-insensitively as plain substrings.
pub fn audit_exclusivity(prompt: &str, support: AttrSet) -> Vec<AttributeId> {
    let lower = prompt.to_lowercase();
    AttributeId::ALL
        .into_iter()
        .filter(|a| !support.contains(*a) && lower.contains(a.name()))
        .collect()
}
