//! `{name}` placeholder substitution with `{{` / `}}` escapes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template \"{template}\": unbound placeholder {{{name}}}")]
    Unbound { template: String, name: String },
    #[error("template \"{template}\": {message} at byte {offset}")]
    Syntax {
        template: String,
        message: String,
        offset: usize,
    },
    #[error("template \"{template}\": {message}")]
    Io { template: String, message: String },
    #[error("final prompt names attribute(s) outside the bottleneck: {names:?}")]
    Exclusivity { names: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Var(String),
}

/// A parsed template with a content digest for run manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub digest: String,
    #[serde(skip)]
    pieces: Vec<Piece>,
}

fn parse(id: &str, text: &str) -> Result<Vec<Piece>, TemplateError> {
    let syntax = |message: &str, offset| TemplateError::Syntax {
        template: id.to_string(),
        message: message.to_string(),
        offset,
    };
    let mut pieces = Vec::new();
    let mut buf = String::new();
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            '{' if matches!(chars.peek(), Some((_, '{'))) => {
                chars.next();
                buf.push('{');
            }
            '}' if matches!(chars.peek(), Some((_, '}'))) => {
                chars.next();
                buf.push('}');
            }
            '{' => {
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some((_, '}')) => break,
                        Some((_, ch)) if ch.is_ascii_alphanumeric() || ch == '_' => name.push(ch),
                        Some((j, _)) => return Err(syntax("invalid character in placeholder", j)),
                        None => return Err(syntax("unterminated placeholder", i)),
                    }
                }
                if name.is_empty() {
                    return Err(syntax("empty placeholder", i));
                }
                if !buf.is_empty() {
                    pieces.push(Piece::Text(std::mem::take(&mut buf)));
                }
                pieces.push(Piece::Var(name));
            }
            '}' => return Err(syntax("unmatched '}'", i)),
            _ => buf.push(c),
        }
    }
    if !buf.is_empty() {
        pieces.push(Piece::Text(buf));
    }
    Ok(pieces)
}

impl Template {
    pub fn new(id: &str, text: &str) -> Result<Self, TemplateError> {
        Ok(Self {
            id: id.to_string(),
            digest: hex::encode(Sha256::digest(text.as_bytes())),
            pieces: parse(id, text)?,
        })
    }

    pub fn load(id: &str, path: &Path) -> Result<Self, TemplateError> {
        let text = fs::read_to_string(path).map_err(|e| TemplateError::Io {
            template: id.to_string(),
            message: format!("{}: {e}", path.display()),
        })?;
        Self::new(id, &text)
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Var(v) => Some(v.as_str()),
            Piece::Text(_) => None,
        })
    }

    /// Fails if any placeholder is not in `allowed`.
    pub fn check_placeholders(&self, allowed: &[&str]) -> Result<(), TemplateError> {
        match self.placeholders().find(|p| !allowed.contains(p)) {
            Some(name) => Err(TemplateError::Unbound {
                template: self.id.clone(),
                name: name.to_string(),
            }),
            None => Ok(()),
        }
    }

    pub fn render(&self, vars: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        let mut out = String::new();
        for p in &self.pieces {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Var(v) => out.push_str(vars.get(v.as_str()).ok_or_else(|| TemplateError::Unbound {
                    template: self.id.clone(),
                    name: v.clone(),
                })?),
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(pairs: &[(&'static str, &str)]) -> BTreeMap<&'static str, String> {
        pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
    }

    #[test]
    fn substitutes_and_escapes() {
        let t = Template::new("t", "Attribute: {attribute}\n{{\"salient\": true}}").unwrap();
        let out = t.render(&vars(&[("attribute", "color")])).unwrap();
        assert_eq!(out, "Attribute: color\n{\"salient\": true}");
        assert_eq!(t.placeholders().collect::<Vec<_>>(), vec!["attribute"]);
    }

    #[test]
    fn unbound_and_syntax_errors() {
        let t = Template::new("t", "{a} {b}").unwrap();
        assert_eq!(
            t.render(&vars(&[("a", "1")])),
            Err(TemplateError::Unbound {
                template: "t".into(),
                name: "b".into()
            })
        );
        assert!(t.check_placeholders(&["a"]).is_err());
        assert!(matches!(Template::new("t", "{open"), Err(TemplateError::Syntax { .. })));
        assert!(matches!(Template::new("t", "x } y"), Err(TemplateError::Syntax { .. })));
        assert!(matches!(Template::new("t", "{}"), Err(TemplateError::Syntax { .. })));
        assert!(matches!(Template::new("t", "{a b}"), Err(TemplateError::Syntax { .. })));
    }

    #[test]
    fn values_are_not_reinterpreted() {
        let t = Template::new("t", "{a}").unwrap();
        assert_eq!(t.render(&vars(&[("a", "{b}")])).unwrap(), "{b}");
    }

    #[test]
    fn digest_tracks_content() {
        let a = Template::new("t", "x").unwrap();
        let b = Template::new("t", "y").unwrap();
        assert_ne!(a.digest, b.digest);
    }
}
