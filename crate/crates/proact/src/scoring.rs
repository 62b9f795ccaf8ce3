//! Proactiveness metrics: the BERTScore primitive, the semantic-similarity
//! and user-simulation metrics, the prompt-based and classification-based
//! baselines, point-biserial metric validation, and batch scoring.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{token_count, CorpusSample, ElementKind, ProactiveResponse};
use crate::error::{Error, Result};
use crate::gateway::{Gateway, GenerationRequest, ValidityScore};
use crate::promptcraft::TemplateSet;
use crate::simulation::Conversation;

/// Precision / recall / F1 of greedy cosine matching between two texts'
/// contextual token embeddings. No IDF weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BertScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Greedy-matching BERTScore of `candidate` against `reference`:
/// precision averages each candidate token's best cosine over reference
/// tokens, recall the symmetric quantity, F1 their harmonic mean.
pub fn bertscore(gateway: &Gateway, candidate: &str, reference: &str) -> Result<BertScore> {
    if candidate.trim().is_empty() || reference.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let cand = gateway.embed_tokens(candidate)?;
    let refr = gateway.embed_tokens(reference)?;

    let best_against = |from: &[Vec<f64>], against: &[Vec<f64>]| -> f64 {
        from.iter()
            .map(|v| {
                against
                    .iter()
                    .map(|w| cosine(v, w))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum::<f64>()
            / from.len() as f64
    };

    let precision = best_against(&cand.vectors, &refr.vectors);
    let recall = best_against(&refr.vectors, &cand.vectors);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(BertScore {
        precision,
        recall,
        f1,
    })
}

/// How a response is cut into segments for the pairwise term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segmenter {
    /// [answer, element] when the element is known, else [answer].
    Structured,
    /// Split the flat text on sentence-final punctuation.
    Sentence,
}

/// Response segments, always at least one.
pub fn segment_response(response: &ProactiveResponse, mode: Segmenter) -> Result<Vec<String>> {
    if response.full_text.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    Ok(match mode {
        Segmenter::Structured => match &response.element {
            Some(e) => vec![response.answer.clone(), e.clone()],
            None => vec![response.answer.clone()],
        },
        Segmenter::Sentence => {
            let mut segments = Vec::new();
            let mut current = String::new();
            for c in response.full_text.chars() {
                current.push(c);
                if matches!(c, '.' | '!' | '?') {
                    let seg = current.trim();
                    if !seg.is_empty() {
                        segments.push(seg.to_string());
                    }
                    current.clear();
                }
            }
            let tail = current.trim();
            if !tail.is_empty() {
                segments.push(tail.to_string());
            }
            if segments.is_empty() {
                vec![response.full_text.trim().to_string()]
            } else {
                segments
            }
        }
    })
}

/// Mean BERTScore F1 over all unordered segment pairs (self-pairs excluded).
pub fn mean_pairwise_bs(gateway: &Gateway, segments: &[String]) -> Result<f64> {
    if segments.len() < 2 {
        return Err(Error::TooFewSegments(segments.len()));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..segments.len() {
        for j in i + 1..segments.len() {
            sum += bertscore(gateway, &segments[i], &segments[j])?.f1;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticConfig {
    /// Weight of the query-relevance term.
    pub alpha: f64,
    pub segmenter: Segmenter,
}

impl Default for SemanticConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            segmenter: Segmenter::Structured,
        }
    }
}

/// The semantic-score combination rule: `alpha * bs_qr + (1 - alpha) * T`
/// where `T` is the mean pairwise similarity for follow-up questions and
/// its complement for additional information. A missing pairwise term
/// (single-segment response) zeroes `T` for both kinds, penalizing the
/// absent element. The result is clamped to [0, 1].
pub fn semantic_combine(
    alpha: f64,
    bs_query_response: f64,
    mean_pairwise: Option<f64>,
    kind: ElementKind,
) -> f64 {
    let second = match kind {
        ElementKind::FollowUpQuestion => mean_pairwise.unwrap_or(0.0),
        ElementKind::AdditionalInformation => 1.0 - mean_pairwise.unwrap_or(1.0),
    };
    (alpha * bs_query_response + (1.0 - alpha) * second).clamp(0.0, 1.0)
}

/// The semantic-similarity proactiveness metric.
pub fn semantic_score(
    gateway: &Gateway,
    query: &str,
    response: &ProactiveResponse,
    kind: ElementKind,
    cfg: &SemanticConfig,
) -> Result<f64> {
    if query.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let bs_qr = bertscore(gateway, query, &response.full_text)?.f1;
    let segments = segment_response(response, cfg.segmenter)?;
    let pairwise = if segments.len() >= 2 {
        Some(mean_pairwise_bs(gateway, &segments)?)
    } else {
        None
    };
    Ok(semantic_combine(cfg.alpha, bs_qr, pairwise, kind))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserSimConfig {
    /// Number of simulated user replies to draw.
    pub n: usize,
    pub temperature: f64,
    /// Template used to elicit the simulated user turn.
    pub user_prompt_template: String,
    pub max_tokens: usize,
}

impl Default for UserSimConfig {
    fn default() -> Self {
        Self {
            n: 5,
            temperature: 0.5,
            user_prompt_template: "user_sim".to_string(),
            max_tokens: 128,
        }
    }
}

/// User-simulation metric: draw `n` simulated user replies to the response
/// and return the mean of their positive sentiments. Any failed draw aborts
/// the whole computation; there is no partial averaging.
pub fn user_sim_score(
    gateway: &Gateway,
    templates: &TemplateSet,
    response: &ProactiveResponse,
    context: &Conversation,
    cfg: &UserSimConfig,
) -> Result<f64> {
    let template = templates.get(&cfg.user_prompt_template)?;
    let mut bindings = BTreeMap::new();
    bindings.insert("context", context.render());
    bindings.insert("response", response.full_text.clone());
    let prompt = template.render(&bindings)?;
    let mut total = 0.0;
    for draw in 0..cfg.n {
        let mut req = GenerationRequest::new(prompt.clone(), cfg.temperature, cfg.max_tokens);
        // distinct seeds keep draws distinct while staying reproducible
        if cfg.temperature == 0.0 {
            req.seed = Some(draw as u64);
        }
        let reply = gateway.generate(&req)?;
        total += gateway.sentiment(&reply)?.positive;
    }
    Ok(total / cfg.n as f64)
}

/// First decimal literal in [0, 1] found in `text`.
fn parse_score(text: &str) -> Option<f64> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() || (bytes[i] == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            let literal = text[start..i].trim_end_matches('.');
            if let Ok(v) = literal.parse::<f64>() {
                if (0.0..=1.0).contains(&v) {
                    return Some(v);
                }
            }
        } else {
            i += 1;
        }
    }
    None
}

/// Prompt-based baseline: a few-shot rubric judge scores the response in
/// [0, 1]; the first in-range decimal in the judge output is the score.
pub fn prompt_based_score(
    gateway: &Gateway,
    templates: &TemplateSet,
    query: &str,
    response: &ProactiveResponse,
    kind: ElementKind,
) -> Result<f64> {
    let template = templates.get(match kind {
        ElementKind::FollowUpQuestion => "judge_fq",
        ElementKind::AdditionalInformation => "judge_ai",
    })?;
    let mut bindings = BTreeMap::new();
    bindings.insert("query", query.to_string());
    bindings.insert("response", response.full_text.clone());
    let output = gateway.generate(&GenerationRequest::new(template.render(&bindings)?, 0.0, 16))?;
    parse_score(&output).ok_or(Error::UnparseableScore(output))
}

/// Classification-based baseline: the kind-specific validity classifier's
/// raw positive logit (with its logistic probability alongside).
pub fn classifier_score(
    gateway: &Gateway,
    query: &str,
    response: &ProactiveResponse,
    kind: ElementKind,
) -> Result<ValidityScore> {
    gateway.classify_validity(query, response, kind)
}

/// Point-biserial correlation between binary labels and scores:
/// `r = (M1 - M0) / s * sqrt(n1 * n0 / n^2)` with `s` the population
/// standard deviation of all scores.
pub fn point_biserial(labels: &[bool], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() || labels.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "need equal-length inputs of size >= 2, got {} labels / {} scores",
            labels.len(),
            scores.len()
        )));
    }
    let n = scores.len() as f64;
    let n1 = labels.iter().filter(|&&l| l).count() as f64;
    let n0 = n - n1;
    if n1 == 0.0 || n0 == 0.0 {
        return Err(Error::DegenerateInput("both label classes must be present".into()));
    }
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(Error::DegenerateInput("scores have zero variance".into()));
    }
    let m1 = labels
        .iter()
        .zip(scores)
        .filter(|(l, _)| **l)
        .map(|(_, s)| s)
        .sum::<f64>()
        / n1;
    let m0 = labels
        .iter()
        .zip(scores)
        .filter(|(l, _)| !**l)
        .map(|(_, s)| s)
        .sum::<f64>()
        / n0;
    Ok((m1 - m0) / var.sqrt() * (n1 * n0 / (n * n)).sqrt())
}

/// Which metrics a batch run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Semantic,
    UserSim,
    PromptBased,
    Classifier,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Semantic,
        Metric::UserSim,
        Metric::PromptBased,
        Metric::Classifier,
    ];
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "semantic" => Ok(Metric::Semantic),
            "user_sim" | "user-sim" | "usersim" => Ok(Metric::UserSim),
            "prompt" | "prompt_based" | "prompt-based" => Ok(Metric::PromptBased),
            "classifier" | "classification" => Ok(Metric::Classifier),
            other => Err(Error::Config(format!("unknown metric: {other}"))),
        }
    }
}

/// Per-sample metric values plus provenance. `errors` carries any
/// per-metric failures; a failing metric leaves its field unset without
/// aborting the batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreReport {
    pub sample_id: String,
    pub kind: ElementKind,
    pub semantic: Option<f64>,
    pub user_sim: Option<f64>,
    pub prompt_based: Option<f64>,
    pub classifier_logit: Option<f64>,
    pub classifier_prob: Option<f64>,
    pub n_tokens: usize,
    pub errors: Vec<String>,
    pub backend_profile_hash: String,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[derive(Default)]
pub struct ScoringConfig {
    pub semantic: SemanticConfig,
    pub user_sim: UserSimConfig,
}


/// Score every sample with the selected metrics. Reports come back in
/// input order; per-sample failures are recorded in the report.
pub fn score_batch(
    gateway: &Gateway,
    templates: &TemplateSet,
    samples: &[CorpusSample],
    metrics: &[Metric],
    cfg: &ScoringConfig,
) -> Result<Vec<ScoreReport>> {
    if metrics.is_empty() {
        return Err(Error::Config("no metrics selected".into()));
    }
    let profile_hash = gateway.profile().hash();
    let config_snapshot = serde_json::to_value(cfg)?;
    let mut reports = Vec::with_capacity(samples.len());
    for sample in samples {
        let kind = sample
            .response
            .element_kind
            .unwrap_or(ElementKind::FollowUpQuestion);
        let mut report = ScoreReport {
            sample_id: sample.id.clone(),
            kind,
            semantic: None,
            user_sim: None,
            prompt_based: None,
            classifier_logit: None,
            classifier_prob: None,
            n_tokens: token_count(&sample.response.full_text),
            errors: Vec::new(),
            backend_profile_hash: profile_hash.clone(),
            config: config_snapshot.clone(),
        };
        for metric in metrics {
            let outcome: Result<()> = (|| {
                match metric {
                    Metric::Semantic => {
                        report.semantic = Some(semantic_score(
                            gateway,
                            &sample.query,
                            &sample.response,
                            kind,
                            &cfg.semantic,
                        )?);
                    }
                    Metric::UserSim => {
                        let context = Conversation::seeded(&sample.query);
                        report.user_sim = Some(user_sim_score(
                            gateway,
                            templates,
                            &sample.response,
                            &context,
                            &cfg.user_sim,
                        )?);
                    }
                    Metric::PromptBased => {
                        report.prompt_based = Some(prompt_based_score(
                            gateway,
                            templates,
                            &sample.query,
                            &sample.response,
                            kind,
                        )?);
                    }
                    Metric::Classifier => {
                        let v = classifier_score(gateway, &sample.query, &sample.response, kind)?;
                        report.classifier_logit = Some(v.positive_logit);
                        report.classifier_prob = Some(v.probability);
                    }
                }
                Ok(())
            })();
            if let Err(e) = outcome {
                report.errors.push(format!("{metric:?}: {e}"));
            }
        }
        reports.push(report);
    }
    Ok(reports)
}
