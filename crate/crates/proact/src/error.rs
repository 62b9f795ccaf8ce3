//! Crate-wide error type.

use crate::corpus::ElementKind;
use crate::promptcraft::Stage;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // corpus
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate sample id: {0}")]
    DuplicateId(String),
    #[error("invalid bounds: min_query_tokens {min} > max_query_tokens {max}")]
    InvalidBounds { min: usize, max: usize },
    #[error("insufficient samples for kind {kind:?}: have {available}, need {needed}")]
    InsufficientSamples {
        kind: ElementKind,
        available: usize,
        needed: usize,
    },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("sample {0} is not in the train split")]
    NonTrainSample(String),

    // gateway
    #[error("backend unavailable after {attempts} attempts: {last_error}")]
    BackendUnavailable { attempts: usize, last_error: String },
    #[error("prompt exceeds backend context window")]
    ContextOverflow,
    #[error("empty text")]
    EmptyText,
    #[error("no validity classifier configured for kind {0:?}")]
    ClassifierNotConfigured(ElementKind),

    // scoring
    #[error("need at least 2 segments for pairwise similarity, got {0}")]
    TooFewSegments(usize),
    #[error("no score in [0,1] found in judge output: {0:?}")]
    UnparseableScore(String),
    #[error("degenerate correlation input: {0}")]
    DegenerateInput(String),

    // promptcraft
    #[error("unbound placeholder {{{0}}}")]
    MissingPlaceholder(String),
    #[error("pipeline stage {stage:?} failed: {source}")]
    StageFailed {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error("final-response marker not found in model output")]
    ParseFailed,
    #[error("demonstration is missing the scores required by the selection criterion")]
    MissingScores,
    #[error("k ({k}) exceeds pool size ({pool})")]
    KTooLarge { k: usize, pool: usize },
    #[error("not enough demonstrations: have {available}, need {needed}")]
    NotEnoughDemos { available: usize, needed: usize },
    #[error("template error: {0}")]
    Template(String),

    // plumbing
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
