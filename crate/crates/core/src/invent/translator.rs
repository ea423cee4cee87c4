//! Turning evidence about a placeholder into a predicate name.

use std::collections::BTreeSet;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::semantics::{Concept, Feature};
use crate::datasets::ObjectRecord;
use crate::error::{Error, Result};

/// What a translator is asked about one placeholder.
#[derive(Clone, Debug)]
pub struct TranslationRequest<'a> {
    pub prompt: &'a str,
    pub arity: usize,
    /// One sample of objects per argument position.
    pub evidence: &'a [Vec<ObjectRecord>],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Translation {
    pub name: String,
    pub description: String,
}

pub trait Translator {
    fn translate(&self, req: &TranslationRequest) -> Result<Translation>;
}

/// Names placeholders from the features their evidence agrees on.
#[derive(Debug, Default)]
pub struct MockTranslator {
    unknown: Mutex<Vec<Vec<Vec<(String, String)>>>>,
}

impl MockTranslator {
    pub fn new() -> Self {
        Self::default()
    }

    fn unknown_name(&self, evidence: &[Vec<ObjectRecord>]) -> String {
        let key: Vec<Vec<(String, String)>> = evidence
            .iter()
            .map(|objs| {
                let mut v: Vec<_> = objs.iter().map(|o| (o.shape.name().to_string(), o.color.name().to_string())).collect();
                v.sort();
                v
            })
            .collect();
        let mut seen = self.unknown.lock().expect("not poisoned");
        let k = match seen.iter().position(|e| *e == key) {
            Some(i) => i + 1,
            None => {
                seen.push(key);
                seen.len()
            }
        };
        format!("unknown_relation_{k}")
    }
}

fn unary_consensus(objs: &[ObjectRecord]) -> BTreeSet<Feature> {
    let mut parts = BTreeSet::new();
    if let Some(first) = objs.first() {
        if objs.iter().all(|o| o.shape == first.shape) {
            parts.insert(Feature::Shape(first.shape));
        }
        if objs.iter().all(|o| o.color == first.color) {
            parts.insert(Feature::Color(first.color));
        }
    }
    parts
}

fn binary_consensus(a: &[ObjectRecord], b: &[ObjectRecord]) -> BTreeSet<Feature> {
    let pairs: Vec<(&ObjectRecord, &ObjectRecord)> = a.iter().flat_map(|x| b.iter().map(move |y| (x, y))).collect();
    let mut parts = BTreeSet::new();
    if pairs.is_empty() {
        return parts;
    }
    if pairs.iter().all(|(x, y)| x.shape == y.shape) {
        parts.insert(Feature::SameShape);
    } else if pairs.iter().all(|(x, y)| x.shape != y.shape) {
        parts.insert(Feature::DifferentShape);
    }
    if pairs.iter().all(|(x, y)| x.color == y.color) {
        parts.insert(Feature::SameColor);
    } else if pairs.iter().all(|(x, y)| x.color != y.color) {
        parts.insert(Feature::DifferentColor);
    }
    parts
}

impl Translator for MockTranslator {
    fn translate(&self, req: &TranslationRequest) -> Result<Translation> {
        let parts = match (req.arity, req.evidence) {
            (1, [a]) => unary_consensus(a),
            (2, [a, b]) => binary_consensus(a, b),
            _ => {
                return Err(Error::Translator(format!(
                    "{} evidence sets for an arity-{} placeholder",
                    req.evidence.len(),
                    req.arity
                )))
            }
        };
        if parts.is_empty() {
            let name = self.unknown_name(req.evidence);
            return Ok(Translation {
                description: "no common feature".into(),
                name,
            });
        }
        let c = Concept { arity: req.arity, parts };
        let description = c.parts.iter().map(|p| p.to_string().replace('_', " ")).collect::<Vec<_>>().join(", ");
        Ok(Translation { name: c.name(), description })
    }
}

/// Last line of `text` that is a snake_case identifier once trimmed of
/// surrounding punctuation and lower-cased.
pub fn parse_answer(text: &str) -> Option<String> {
    text.lines().rev().find_map(|line| {
        let t = line.trim().trim_matches(|c: char| !c.is_ascii_alphanumeric() && c != '_').to_ascii_lowercase();
        let ok = !t.is_empty()
            && t.chars().next().is_some_and(|c| c.is_ascii_lowercase())
            && t.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
        ok.then_some(t)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HttpTranslatorConfig {
    pub url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub token_env: String,
    pub timeout_secs: u64,
}

impl Default for HttpTranslatorConfig {
    fn default() -> Self {
        HttpTranslatorConfig {
            url: "http://127.0.0.1:8080/translate".into(),
            model: "default".into(),
            token_env: "TRANSLATOR_TOKEN".into(),
            timeout_secs: 60,
        }
    }
}

/// Posts `{model, prompt, evidence}` as JSON and reads the answer from the
/// response: a JSON `text` field, a chat-style `choices[0].message.content`,
/// or the raw body.
pub struct HttpTranslator {
    cfg: HttpTranslatorConfig,
    agent: ureq::Agent,
}

impl HttpTranslator {
    pub fn new(cfg: HttpTranslatorConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(cfg.timeout_secs)).build();
        HttpTranslator { cfg, agent }
    }
}

fn response_text(body: &str) -> String {
    match serde_json::from_str::<serde_json::Value>(body) {
        Ok(v) => v
            .get("text")
            .and_then(|t| t.as_str())
            .or_else(|| v.pointer("/choices/0/message/content").and_then(|t| t.as_str()))
            .unwrap_or(body)
            .to_string(),
        Err(_) => body.to_string(),
    }
}

impl Translator for HttpTranslator {
    fn translate(&self, req: &TranslationRequest) -> Result<Translation> {
        let evidence: Vec<Vec<String>> = req
            .evidence
            .iter()
            .map(|objs| objs.iter().map(super::describe_object).collect())
            .collect();
        let payload = serde_json::json!({ "model": self.cfg.model, "prompt": req.prompt, "evidence": evidence });
        log::info!("translator prompt:\n{}", req.prompt);
        let mut call = self.agent.post(&self.cfg.url);
        if let Ok(token) = std::env::var(&self.cfg.token_env) {
            call = call.set("Authorization", &format!("Bearer {token}"));
        }
        let body = call
            .send_json(payload)
            .map_err(|e| Error::Translator(e.to_string()))?
            .into_string()
            .map_err(|e| Error::Translator(e.to_string()))?;
        let text = response_text(&body);
        let name = parse_answer(&text).ok_or_else(|| Error::Translator("no identifier in the answer".into()))?;
        Ok(Translation { name, description: text.trim().to_string() })
    }
}
