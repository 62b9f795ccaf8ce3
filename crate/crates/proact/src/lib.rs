//! Proactive response generation and evaluation for information-seeking
//! dialogue.
//!
//! A proactive answer goes beyond the literal query: it either appends a
//! follow-up question offering related information, or folds that
//! information directly into the reply. This crate provides
//!
//! - a corpus layer for samples pairing queries with proactive responses
//!   ([`corpus`]),
//! - a model gateway abstracting generation, embedding, sentiment and
//!   validity-classification backends behind caching, retries and a
//!   parallelism cap ([`gateway`]),
//! - prompt pipelines that produce proactive responses: direct prompting,
//!   a three-step chain, and a single-call chain ([`promptcraft`]),
//! - proactiveness metrics — semantic-similarity, simulated-user
//!   sentiment, a rubric judge, and a validity classifier — plus
//!   point-biserial validation against human labels ([`scoring`]),
//! - a multi-turn simulation harness pitting reactive and proactive
//!   agents against a simulated user ([`simulation`]).
//!
//! Everything runs offline against stub backends; HTTP backends slot in
//! through a TOML config. See `examples/` for one runnable walkthrough per
//! capability.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod gateway;
pub mod promptcraft;
pub mod scoring;
pub mod simulation;

pub use error::{Error, Result};
