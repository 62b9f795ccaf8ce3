//! Domain types and corpus storage: loading, filtering, splitting,
//! statistics, and instruction-tuning export.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The two kinds of proactive element a response can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ElementKind {
    /// Follow-up question: asks whether the user wants a specific piece of
    /// related information.
    #[serde(rename = "FQ")]
    FollowUpQuestion,
    /// Additional information: delivers the related information directly.
    #[serde(rename = "AI")]
    AdditionalInformation,
}

impl ElementKind {
    pub const ALL: [ElementKind; 2] = [
        ElementKind::FollowUpQuestion,
        ElementKind::AdditionalInformation,
    ];

    pub fn short(&self) -> &'static str {
        match self {
            ElementKind::FollowUpQuestion => "FQ",
            ElementKind::AdditionalInformation => "AI",
        }
    }
}

impl std::str::FromStr for ElementKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fq" | "follow_up_question" | "followup" => Ok(ElementKind::FollowUpQuestion),
            "ai" | "additional_information" | "addinfo" => Ok(ElementKind::AdditionalInformation),
            other => Err(Error::Config(format!("unknown element kind: {other}"))),
        }
    }
}

/// An answer plus an optional proactive element.
///
/// `full_text` is the answer joined with the element by a single space when
/// the element is present, and the answer alone otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProactiveResponse {
    pub answer: String,
    pub element: Option<String>,
    pub element_kind: Option<ElementKind>,
    pub full_text: String,
}

impl ProactiveResponse {
    /// Answer-only response (reactive).
    pub fn answer_only(answer: impl Into<String>) -> Result<Self> {
        let answer = answer.into();
        if answer.is_empty() {
            return Err(Error::EmptyText);
        }
        let full_text = answer.clone();
        Ok(Self {
            answer,
            element: None,
            element_kind: None,
            full_text,
        })
    }

    /// Answer plus proactive element; `full_text` is derived.
    pub fn with_element(
        answer: impl Into<String>,
        element: impl Into<String>,
        kind: ElementKind,
    ) -> Result<Self> {
        let answer = answer.into();
        let element = element.into();
        if answer.is_empty() || element.is_empty() {
            return Err(Error::EmptyText);
        }
        let full_text = format!("{answer} {element}");
        Ok(Self {
            answer,
            element: Some(element),
            element_kind: Some(kind),
            full_text,
        })
    }

    /// Flat text whose answer/element split is unknown (e.g. raw model
    /// output). The whole text doubles as the answer.
    pub fn flat(text: impl Into<String>, kind: Option<ElementKind>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(Error::EmptyText);
        }
        Ok(Self {
            answer: text.clone(),
            element: None,
            element_kind: kind,
            full_text: text,
        })
    }

    pub fn check_invariants(&self) -> Result<()> {
        if self.answer.is_empty() {
            return Err(Error::EmptyText);
        }
        if self.element.is_some() != self.element_kind.is_some() {
            return Err(Error::Config(
                "element and element_kind must be present together".into(),
            ));
        }
        let expected = match &self.element {
            Some(e) => format!("{} {}", self.answer, e),
            None => self.answer.clone(),
        };
        if self.full_text != expected && self.full_text != self.answer {
            return Err(Error::Config("full_text inconsistent with answer/element".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Unsplit,
}

/// Human or synthetic proactivity label, used by metric validation sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Valid,
    Invalid,
}

/// One single-turn dialogue sample: a query and its reference proactive
/// response, with optional reference knowledge.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSample {
    pub id: String,
    pub query: String,
    pub response: ProactiveResponse,
    pub long_answer: Option<String>,
    pub split: Split,
    pub label: Option<Label>,
}

/// On-disk JSONL record. Flattened so the corpus file stays diff-friendly.
#[derive(Debug, Serialize, Deserialize)]
struct CorpusRecord {
    id: String,
    query: String,
    answer: String,
    element: Option<String>,
    element_kind: Option<ElementKind>,
    long_answer: Option<String>,
    split: Split,
    label: Option<Label>,
}

impl From<&CorpusSample> for CorpusRecord {
    fn from(s: &CorpusSample) -> Self {
        CorpusRecord {
            id: s.id.clone(),
            query: s.query.clone(),
            answer: s.response.answer.clone(),
            element: s.response.element.clone(),
            element_kind: s.response.element_kind,
            long_answer: s.long_answer.clone(),
            split: s.split,
            label: s.label,
        }
    }
}

impl TryFrom<CorpusRecord> for CorpusSample {
    type Error = Error;
    fn try_from(r: CorpusRecord) -> Result<Self> {
        if r.query.is_empty() {
            return Err(Error::Config("query must be non-empty".into()));
        }
        let response = match (r.element, r.element_kind) {
            (Some(e), Some(k)) => ProactiveResponse::with_element(r.answer, e, k)?,
            (None, None) => ProactiveResponse::answer_only(r.answer)?,
            _ => {
                return Err(Error::Config(
                    "element and element_kind must be present together".into(),
                ))
            }
        };
        Ok(CorpusSample {
            id: r.id,
            query: r.query,
            response,
            long_answer: r.long_answer,
            split: r.split,
            label: r.label,
        })
    }
}

/// Whitespace token count, used for all corpus statistics and filters.
pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Per-partition token averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindStats {
    pub n_samples: usize,
    pub avg_query_tokens: f64,
    pub avg_response_tokens: f64,
    pub avg_element_tokens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_samples: usize,
    pub avg_query_tokens: f64,
    pub avg_response_tokens: f64,
    pub avg_element_tokens: f64,
    pub per_kind: BTreeMap<ElementKind, KindStats>,
}

fn averages(samples: &[&CorpusSample]) -> KindStats {
    let n = samples.len();
    let sum = |f: &dyn Fn(&CorpusSample) -> usize| -> f64 {
        samples.iter().map(|s| f(s) as f64).sum::<f64>()
    };
    let q = sum(&|s| token_count(&s.query));
    let r = sum(&|s| token_count(&s.response.full_text));
    // absent element counts as zero tokens, keeping the weighted-average
    // identity over concatenated corpora exact
    let e = sum(&|s| s.response.element.as_deref().map_or(0, token_count));
    KindStats {
        n_samples: n,
        avg_query_tokens: q / n as f64,
        avg_response_tokens: r / n as f64,
        avg_element_tokens: e / n as f64,
    }
}

/// Token-count averages over the corpus, overall and per element kind.
pub fn corpus_stats(samples: &[CorpusSample]) -> Result<CorpusStats> {
    if samples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let all: Vec<&CorpusSample> = samples.iter().collect();
    let overall = averages(&all);
    let mut per_kind = BTreeMap::new();
    for kind in ElementKind::ALL {
        let subset: Vec<&CorpusSample> = samples
            .iter()
            .filter(|s| s.response.element_kind == Some(kind))
            .collect();
        if !subset.is_empty() {
            per_kind.insert(kind, averages(&subset));
        }
    }
    Ok(CorpusStats {
        n_samples: overall.n_samples,
        avg_query_tokens: overall.avg_query_tokens,
        avg_response_tokens: overall.avg_response_tokens,
        avg_element_tokens: overall.avg_element_tokens,
        per_kind,
    })
}

/// Load a JSONL corpus, checking per-line syntax and id uniqueness.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusSample>> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        let sample: CorpusSample = record.try_into().map_err(|e: Error| Error::MalformedRecord {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        if !seen.insert(sample.id.clone()) {
            return Err(Error::DuplicateId(sample.id));
        }
        samples.push(sample);
    }
    Ok(samples)
}

/// Write a corpus as JSONL (UTF-8, LF, one record per line).
pub fn save_corpus(samples: &[CorpusSample], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        let record = CorpusRecord::from(s);
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Retain samples whose query and long-answer token counts satisfy the
/// bounds. Samples without a long answer are dropped whenever
/// `min_long_answer_tokens > 0`.
pub fn filter_corpus(
    samples: &[CorpusSample],
    min_query_tokens: usize,
    max_query_tokens: usize,
    min_long_answer_tokens: usize,
) -> Result<Vec<CorpusSample>> {
    if min_query_tokens > max_query_tokens {
        return Err(Error::InvalidBounds {
            min: min_query_tokens,
            max: max_query_tokens,
        });
    }
    Ok(samples
        .iter()
        .filter(|s| {
            let q = token_count(&s.query);
            if q < min_query_tokens || q > max_query_tokens {
                return false;
            }
            match (&s.long_answer, min_long_answer_tokens) {
                (_, 0) => true,
                (None, _) => false,
                (Some(la), min) => token_count(la) >= min,
            }
        })
        .cloned()
        .collect())
}

/// Tag each sample TRAIN or TEST: per element kind, exactly `train_per_kind`
/// samples go to TRAIN and the remainder to TEST. The assignment depends
/// only on the set of ids and the seed, not on input order.
pub fn split_corpus(
    samples: &[CorpusSample],
    train_per_kind: usize,
    seed: u64,
) -> Result<Vec<CorpusSample>> {
    let mut out = samples.to_vec();
    for kind in ElementKind::ALL {
        let mut ids: Vec<&str> = out
            .iter()
            .filter(|s| s.response.element_kind == Some(kind))
            .map(|s| s.id.as_str())
            .collect();
        if ids.is_empty() && train_per_kind == 0 {
            continue;
        }
        if ids.len() < train_per_kind {
            return Err(Error::InsufficientSamples {
                kind,
                available: ids.len(),
                needed: train_per_kind,
            });
        }
        ids.sort_unstable();
        let kind_salt = match kind {
            ElementKind::FollowUpQuestion => 0x46_51u64,
            ElementKind::AdditionalInformation => 0x41_49u64,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ kind_salt);
        ids.shuffle(&mut rng);
        let train: HashSet<String> = ids[..train_per_kind].iter().map(|s| s.to_string()).collect();
        for s in out
            .iter_mut()
            .filter(|s| s.response.element_kind == Some(kind))
        {
            s.split = if train.contains(&s.id) {
                Split::Train
            } else {
                Split::Test
            };
        }
    }
    // anything without an element kind still gets a deterministic tag
    for s in out
        .iter_mut()
        .filter(|s| s.response.element_kind.is_none())
    {
        s.split = Split::Test;
    }
    Ok(out)
}

/// Instruction-tuning record written by [`export_sft`].
#[derive(Debug, Serialize, Deserialize)]
pub struct SftRecord {
    pub instruction: String,
    pub response: String,
}

/// Export TRAIN samples as instruction/response JSONL. The instruction
/// template may reference `{query}`.
pub fn export_sft(
    samples: &[CorpusSample],
    instruction_template: &str,
    path: impl AsRef<Path>,
) -> Result<usize> {
    for s in samples {
        if s.split != Split::Train {
            return Err(Error::NonTrainSample(s.id.clone()));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        let record = SftRecord {
            instruction: instruction_template.replace("{query}", &s.query),
            response: s.response.full_text.clone(),
        };
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(samples.len())
}
