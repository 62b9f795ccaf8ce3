//! Prompt construction and execution: the direct, 3-step, and 3-in-1
//! pipelines, k-shot demonstration handling, model-output post-processing,
//! and metric-driven demonstration selection.

mod template;

pub use template::{extract_placeholders, PromptTemplate, Stage, TemplateSet};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{ElementKind, ProactiveResponse};
use crate::error::{Error, Result};
use crate::gateway::{Gateway, GenerationRequest};

/// Marker line the 3-in-1 templates instruct the model to emit before the
/// combined response; the parser takes everything after its last occurrence.
pub const FINAL_RESPONSE_MARKER: &str = "Final response:";

/// Clean raw model output: unescape literally-rendered escape sequences
/// (`\n`, `\t`, `\"`, `\\`) until none remain, then collapse whitespace
/// runs to single spaces and trim.
pub fn postprocess(raw: &str) -> String {
    let mut s = raw.to_string();
    loop {
        let next = unescape_once(&s);
        if next == s {
            break;
        }
        s = next;
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn unescape_once(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.peek() {
                Some('n') | Some('t') => {
                    chars.next();
                    out.push(' ');
                }
                Some('"') => {
                    chars.next();
                    out.push('"');
                }
                Some('\\') => {
                    chars.next();
                    out.push('\\');
                }
                _ => out.push(c),
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// A query/proactive-response pair usable as an in-context example,
/// optionally carrying the metric scores demonstration selection sorts by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub query: String,
    pub response: ProactiveResponse,
    pub semantic: Option<f64>,
    pub user_sim: Option<f64>,
}

impl Demonstration {
    pub fn new(query: impl Into<String>, response: ProactiveResponse) -> Self {
        Self {
            query: query.into(),
            response,
            semantic: None,
            user_sim: None,
        }
    }

    pub fn with_scores(mut self, semantic: f64, user_sim: f64) -> Self {
        self.semantic = Some(semantic);
        self.user_sim = Some(user_sim);
        self
    }
}

/// Demonstration blocks in the given order, separated by blank lines.
pub fn render_demonstrations(demos: &[Demonstration]) -> String {
    demos
        .iter()
        .map(|d| {
            format!(
                "User query: {}\nProactive response: {}",
                d.query, d.response.full_text
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Direct,
    ThreeStep,
    ThreeInOne,
}

impl std::str::FromStr for Pipeline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Pipeline::Direct),
            "3step" | "three_step" | "three-step" => Ok(Pipeline::ThreeStep),
            "3in1" | "three_in_one" | "three-in-one" => Ok(Pipeline::ThreeInOne),
            other => Err(Error::Config(format!("unknown pipeline: {other}"))),
        }
    }
}

/// One pipeline execution: every intermediate stage output plus the final
/// proactive response, serializable for audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationRun {
    pub pipeline: Pipeline,
    pub shots: usize,
    pub kind: ElementKind,
    pub intermediate: BTreeMap<Stage, String>,
    pub final_response: ProactiveResponse,
}

/// Runs the three pipelines against a gateway with a fixed template set.
pub struct PipelineRunner<'a> {
    gateway: &'a Gateway,
    templates: &'a TemplateSet,
    pub temperature: f64,
    pub max_tokens: usize,
}

impl<'a> PipelineRunner<'a> {
    pub fn new(gateway: &'a Gateway, templates: &'a TemplateSet) -> Self {
        Self {
            gateway,
            templates,
            temperature: 0.2,
            max_tokens: 512,
        }
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    fn generate(&self, prompt: String) -> Result<String> {
        self.gateway.generate(&GenerationRequest::new(
            prompt,
            self.temperature,
            self.max_tokens,
        ))
    }

    fn check_shots(demos: &[Demonstration], shots: usize) -> Result<()> {
        if demos.len() < shots {
            return Err(Error::NotEnoughDemos {
                available: demos.len(),
                needed: shots,
            });
        }
        Ok(())
    }

    /// Single-prompt generation: task description, `shots` demonstrations,
    /// and the query. The output is kept flat (no answer/element split).
    pub fn run_direct(
        &self,
        query: &str,
        kind: ElementKind,
        demos: &[Demonstration],
        shots: usize,
    ) -> Result<GenerationRun> {
        Self::check_shots(demos, shots)?;
        let template = self.templates.get(match kind {
            ElementKind::FollowUpQuestion => "direct_fq",
            ElementKind::AdditionalInformation => "direct_ai",
        })?;
        let mut bindings = BTreeMap::new();
        bindings.insert("query", query.to_string());
        bindings.insert("demonstrations", render_demonstrations(&demos[..shots]));
        let raw = self.generate(template.render(&bindings)?)?;
        let cleaned = postprocess(&raw);
        let mut intermediate = BTreeMap::new();
        intermediate.insert(Stage::Direct, cleaned.clone());
        Ok(GenerationRun {
            pipeline: Pipeline::Direct,
            shots,
            kind,
            intermediate,
            final_response: ProactiveResponse::flat(cleaned, Some(kind))?,
        })
    }

    /// Three sequential inferences: answer the query, find related
    /// information absent from the answer, turn it into the proactive
    /// element. The final response is the answer and the element joined by
    /// a single space. The answering stage is always 0-shot; demonstrations
    /// apply to the element-formulation stage only.
    pub fn run_three_step(
        &self,
        query: &str,
        kind: ElementKind,
        demos_p3: &[Demonstration],
        shots: usize,
    ) -> Result<GenerationRun> {
        Self::check_shots(demos_p3, shots)?;
        let stage_call = |stage: Stage, prompt: Result<String>| -> Result<String> {
            let out = prompt.and_then(|p| self.generate(p)).map_err(|e| {
                Error::StageFailed {
                    stage,
                    source: Box::new(e),
                }
            })?;
            Ok(postprocess(&out))
        };

        let p1 = self.templates.get("p1")?;
        let mut b1 = BTreeMap::new();
        b1.insert("query", query.to_string());
        let answer = stage_call(Stage::P1, p1.render(&b1))?;

        let p2 = self.templates.get("p2")?;
        let mut b2 = BTreeMap::new();
        b2.insert("query", query.to_string());
        b2.insert("answer", answer.clone());
        let info = stage_call(Stage::P2, p2.render(&b2))?;

        let p3 = self.templates.get(match kind {
            ElementKind::FollowUpQuestion => "p3_fq",
            ElementKind::AdditionalInformation => "p3_ai",
        })?;
        let mut b3 = BTreeMap::new();
        b3.insert("query", query.to_string());
        b3.insert("info", info.clone());
        b3.insert("demonstrations", render_demonstrations(&demos_p3[..shots]));
        let element = stage_call(Stage::P3, p3.render(&b3))?;

        let mut intermediate = BTreeMap::new();
        intermediate.insert(Stage::P1, answer.clone());
        intermediate.insert(Stage::P2, info);
        intermediate.insert(Stage::P3, element.clone());
        Ok(GenerationRun {
            pipeline: Pipeline::ThreeStep,
            shots,
            kind,
            intermediate,
            final_response: ProactiveResponse::with_element(answer, element, kind)?,
        })
    }

    /// Single inference with step-by-step instructions; the combined
    /// response is whatever follows the last [`FINAL_RESPONSE_MARKER`].
    pub fn run_three_in_one(
        &self,
        query: &str,
        kind: ElementKind,
        demos: &[Demonstration],
        shots: usize,
    ) -> Result<GenerationRun> {
        Self::check_shots(demos, shots)?;
        let template = self.templates.get(match kind {
            ElementKind::FollowUpQuestion => "three_in_one_fq",
            ElementKind::AdditionalInformation => "three_in_one_ai",
        })?;
        let mut bindings = BTreeMap::new();
        bindings.insert("query", query.to_string());
        bindings.insert("demonstrations", render_demonstrations(&demos[..shots]));
        let raw = self.generate(template.render(&bindings)?)?;
        let cleaned = postprocess(&raw);
        let final_text = cleaned
            .rfind(FINAL_RESPONSE_MARKER)
            .map(|i| cleaned[i + FINAL_RESPONSE_MARKER.len()..].trim().to_string())
            .filter(|s| !s.is_empty())
            .ok_or(Error::ParseFailed)?;
        let mut intermediate = BTreeMap::new();
        intermediate.insert(Stage::ThreeInOne, cleaned.clone());
        Ok(GenerationRun {
            pipeline: Pipeline::ThreeInOne,
            shots,
            kind,
            intermediate,
            final_response: ProactiveResponse::flat(final_text, Some(kind))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionCriterion {
    Semantic,
    Sentiment,
    Sum,
}

impl std::str::FromStr for SelectionCriterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "semantic" => Ok(SelectionCriterion::Semantic),
            "sentiment" | "user_sim" | "user-sim" => Ok(SelectionCriterion::Sentiment),
            "sum" => Ok(SelectionCriterion::Sum),
            other => Err(Error::Config(format!("unknown selection criterion: {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionDirection {
    Top,
    Bottom,
}

fn criterion_value(d: &Demonstration, criterion: SelectionCriterion) -> Result<f64> {
    let semantic = || d.semantic.ok_or(Error::MissingScores);
    let user_sim = || d.user_sim.ok_or(Error::MissingScores);
    Ok(match criterion {
        SelectionCriterion::Semantic => semantic()?,
        SelectionCriterion::Sentiment => user_sim()?,
        SelectionCriterion::Sum => semantic()? + user_sim()?,
    })
}

/// The k most extreme demonstrations by the criterion, highest (TOP) or
/// lowest (BOTTOM) first. Ties break toward earlier pool position.
pub fn select_demonstrations(
    pool: &[Demonstration],
    k: usize,
    criterion: SelectionCriterion,
    direction: SelectionDirection,
) -> Result<Vec<Demonstration>> {
    if k > pool.len() {
        return Err(Error::KTooLarge { k, pool: pool.len() });
    }
    let mut indexed: Vec<(usize, f64)> = pool
        .iter()
        .enumerate()
        .map(|(i, d)| Ok((i, criterion_value(d, criterion)?)))
        .collect::<Result<_>>()?;
    indexed.sort_by(|a, b| {
        let ord = a.1.partial_cmp(&b.1).expect("scores are finite");
        let ord = match direction {
            SelectionDirection::Top => ord.reverse(),
            SelectionDirection::Bottom => ord,
        };
        ord.then(a.0.cmp(&b.0))
    });
    Ok(indexed[..k].iter().map(|(i, _)| pool[*i].clone()).collect())
}
