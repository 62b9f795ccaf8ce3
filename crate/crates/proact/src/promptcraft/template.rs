//! Prompt templates: text assets with a small front matter (name, kind,
//! stage, placeholder list) separated from the body by a `---` line.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::ElementKind;
use crate::error::{Error, Result};

/// Which stage of which pipeline a template serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Direct,
    P1,
    P2,
    P3,
    ThreeInOne,
}

impl std::str::FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Stage::Direct),
            "p1" => Ok(Stage::P1),
            "p2" => Ok(Stage::P2),
            "p3" => Ok(Stage::P3),
            "three_in_one" => Ok(Stage::ThreeInOne),
            other => Err(Error::Template(format!("unknown stage: {other}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    /// None means the template applies to both element kinds (e.g. the
    /// query-answering stage, which is kind-agnostic).
    pub kind: Option<ElementKind>,
    pub stage: Stage,
    pub placeholders: Vec<String>,
}

/// Placeholder names appearing in a body, in order of first appearance.
pub fn extract_placeholders(body: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        rest = &rest[open + 1..];
        if let Some(close) = rest.find('}') {
            let name = &rest[..close];
            if !name.is_empty()
                && name.chars().all(|c| c.is_ascii_lowercase() || c == '_')
                && !out.iter().any(|n| n == name)
            {
                out.push(name.to_string());
            }
            rest = &rest[close + 1..];
        } else {
            break;
        }
    }
    out
}

impl PromptTemplate {
    /// Parse the front-matter/body format and check that the body's
    /// placeholders are exactly the declared ones.
    pub fn parse(source: &str) -> Result<Self> {
        let (front, body) = source
            .split_once("\n---\n")
            .ok_or_else(|| Error::Template("missing `---` front-matter separator".into()))?;
        let mut fields = BTreeMap::new();
        for line in front.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| Error::Template(format!("bad front-matter line: {line}")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Template(format!("front matter missing `{k}`")))
        };
        let name = get("name")?;
        let kind = match get("kind")?.as_str() {
            "any" => None,
            other => Some(other.parse()?),
        };
        let stage: Stage = get("stage")?.parse()?;
        let placeholders: Vec<String> = get("placeholders")?
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let body = body.trim().to_string();

        let declared: BTreeSet<&str> = placeholders.iter().map(String::as_str).collect();
        let found_vec = extract_placeholders(&body);
        let found: BTreeSet<&str> = found_vec.iter().map(String::as_str).collect();
        if declared != found {
            return Err(Error::Template(format!(
                "template {name}: declared placeholders {declared:?} != body placeholders {found:?}"
            )));
        }
        Ok(Self {
            name,
            body,
            kind,
            stage,
            placeholders,
        })
    }

    /// Substitute every placeholder. Fails on any unbound placeholder;
    /// extra bindings are ignored.
    pub fn render(&self, bindings: &BTreeMap<&str, String>) -> Result<String> {
        let mut out = self.body.clone();
        for name in &self.placeholders {
            let value = bindings
                .get(name.as_str())
                .ok_or_else(|| Error::MissingPlaceholder(name.clone()))?;
            out = out.replace(&format!("{{{name}}}"), value);
        }
        Ok(out)
    }
}

macro_rules! builtin_templates {
    ($($file:literal),+ $(,)?) => {
        [$(include_str!(concat!("../../templates/", $file))),+]
    };
}

/// A named collection of templates, either the built-in set or one loaded
/// from a directory of `.txt` assets.
pub struct TemplateSet {
    templates: BTreeMap<String, PromptTemplate>,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let sources = builtin_templates![
            "direct_fq.txt",
            "direct_ai.txt",
            "p1.txt",
            "p2.txt",
            "p3_fq.txt",
            "p3_ai.txt",
            "three_in_one_fq.txt",
            "three_in_one_ai.txt",
            "judge_fq.txt",
            "judge_ai.txt",
            "user_sim.txt",
            "sim_user.txt",
            "reactive.txt",
            "p1_dialogue.txt",
            "p2_dialogue.txt",
            "three_in_one_dialogue_fq.txt",
            "three_in_one_dialogue_ai.txt",
        ];
        let mut templates = BTreeMap::new();
        for src in sources {
            let t = PromptTemplate::parse(src).expect("builtin template parses");
            templates.insert(t.name.clone(), t);
        }
        Self { templates }
    }

    /// Load every `.txt` file in `dir`. Files override builtins by name.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let mut set = Self::builtin();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) == Some("txt") {
                let t = PromptTemplate::parse(&std::fs::read_to_string(&path)?)?;
                set.templates.insert(t.name.clone(), t);
            }
        }
        Ok(set)
    }

    pub fn get(&self, name: &str) -> Result<&PromptTemplate> {
        self.templates
            .get(name)
            .ok_or_else(|| Error::Template(format!("no template named {name}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}
