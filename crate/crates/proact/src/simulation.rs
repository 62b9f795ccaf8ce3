//! Multi-turn episodes between a simulated user and a reactive or proactive
//! agent, with lexical termination detection and aggregate statistics.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{Gateway, GenerationRequest};
use crate::promptcraft::{postprocess, FINAL_RESPONSE_MARKER};
use crate::promptcraft::TemplateSet;
use crate::scoring::bertscore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversationStatus {
    Ongoing,
    EndedNatural,
    EndedCap,
}

/// An ordered transcript. Roles strictly alternate starting with the user;
/// `user_turns` counts the user turns present in `turns`. A terminal
/// acknowledgment that ended the conversation is kept aside in
/// `closing_user_turn` rather than counted as a sustaining turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub turns: Vec<Turn>,
    pub status: ConversationStatus,
    pub user_turns: usize,
    pub closing_user_turn: Option<String>,
}

impl Conversation {
    /// A conversation holding only the opening user query.
    pub fn seeded(query: &str) -> Self {
        Self {
            turns: vec![Turn {
                role: Role::User,
                text: query.to_string(),
            }],
            status: ConversationStatus::Ongoing,
            user_turns: 1,
            closing_user_turn: None,
        }
    }

    fn push(&mut self, role: Role, text: String) {
        debug_assert_ne!(self.turns.last().map(|t| t.role), Some(role));
        if role == Role::User {
            self.user_turns += 1;
        }
        self.turns.push(Turn { role, text });
    }

    /// Plain-text rendering used inside prompts.
    pub fn render(&self) -> String {
        self.turns
            .iter()
            .map(|t| match t.role {
                Role::User => format!("User: {}", t.text),
                Role::Assistant => format!("Assistant: {}", t.text),
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn check_alternation(&self) -> bool {
        self.turns
            .iter()
            .enumerate()
            .all(|(i, t)| t.role == if i % 2 == 0 { Role::User } else { Role::Assistant })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    Reactive,
    ProactiveFq,
    ProactiveAi,
}

impl std::str::FromStr for AgentMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reactive" => Ok(AgentMode::Reactive),
            "proactive-fq" | "proactive_fq" | "fq" => Ok(AgentMode::ProactiveFq),
            "proactive-ai" | "proactive_ai" | "ai" => Ok(AgentMode::ProactiveAi),
            other => Err(Error::Config(format!("unknown agent mode: {other}"))),
        }
    }
}

/// Cues that mark a user turn as still requesting information.
pub const DEFAULT_CUE_LEXICON: [&str; 7] = ["tell me", "what", "how", "why", "yes", "please", "more"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub agent_mode: AgentMode,
    pub max_turns: usize,
    pub temperature: f64,
    pub max_tokens: usize,
    /// Information-request cues, matched case-insensitively as substrings.
    pub cue_lexicon: Vec<String>,
    /// Pairwise BERTScore threshold above which a proactive element is
    /// flagged as a repeat of an earlier one.
    pub repeat_threshold: f64,
}

impl EpisodeConfig {
    pub fn new(agent_mode: AgentMode) -> Self {
        Self {
            agent_mode,
            max_turns: 10,
            temperature: 0.2,
            max_tokens: 256,
            cue_lexicon: DEFAULT_CUE_LEXICON.iter().map(|s| s.to_string()).collect(),
            repeat_threshold: 0.9,
        }
    }
}

/// Outcome of the lexical termination check, with the cues that fired.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TerminalDecision {
    pub terminal: bool,
    pub matched_cues: Vec<String>,
    pub has_question_mark: bool,
}

/// A user turn is terminal iff it carries no question mark and no
/// information-request cue from the lexicon.
pub fn terminal_decision(user_turn: &str, cue_lexicon: &[String]) -> TerminalDecision {
    let lower = user_turn.to_lowercase();
    let has_question_mark = lower.contains('?');
    let matched_cues: Vec<String> = cue_lexicon
        .iter()
        .filter(|cue| lower.contains(cue.to_lowercase().as_str()))
        .cloned()
        .collect();
    TerminalDecision {
        terminal: !has_question_mark && matched_cues.is_empty(),
        matched_cues,
        has_question_mark,
    }
}

pub fn is_terminal(user_turn: &str, cue_lexicon: &[String]) -> bool {
    terminal_decision(user_turn, cue_lexicon).terminal
}

/// One finished episode: the transcript plus repeat-flag count and any
/// termination log entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Episode {
    pub conversation: Conversation,
    pub mode: AgentMode,
    pub repeats_flagged: usize,
    pub termination_log: Vec<TerminalDecision>,
}

/// Runs episodes: the user side and the agent side may be served by the
/// same gateway or by two different ones (e.g. a stronger assistant model).
pub struct Simulator<'a> {
    pub user_gateway: &'a Gateway,
    pub agent_gateway: &'a Gateway,
    pub templates: &'a TemplateSet,
}

impl<'a> Simulator<'a> {
    pub fn new(gateway: &'a Gateway, templates: &'a TemplateSet) -> Self {
        Self {
            user_gateway: gateway,
            agent_gateway: gateway,
            templates,
        }
    }

    pub fn with_agent_gateway(mut self, agent: &'a Gateway) -> Self {
        self.agent_gateway = agent;
        self
    }

    fn generate(
        &self,
        gateway: &Gateway,
        prompt: String,
        cfg: &EpisodeConfig,
        seed: Option<u64>,
    ) -> Result<String> {
        let mut req = GenerationRequest::new(prompt, cfg.temperature, cfg.max_tokens);
        req.seed = seed;
        Ok(postprocess(&gateway.generate(&req)?))
    }

    /// Agent turn. Returns the full response plus the proactive element
    /// (when one is structurally separable) for repeat tracking.
    fn agent_turn(
        &self,
        conv: &Conversation,
        p1_outputs: &mut Vec<String>,
        cfg: &EpisodeConfig,
        seed: Option<u64>,
    ) -> Result<(String, Option<String>)> {
        let context = conv.render();
        match cfg.agent_mode {
            AgentMode::Reactive => {
                let template = self.templates.get("reactive")?;
                let mut b = BTreeMap::new();
                b.insert("context", context);
                let out = self.generate(self.agent_gateway, template.render(&b)?, cfg, seed)?;
                Ok((out, None))
            }
            AgentMode::ProactiveFq => {
                // dialogue-context 3-step variant: the answering stage sees
                // the whole context, the related-information stage sees the
                // concatenation of every answer produced so far
                let p1 = self.templates.get("p1_dialogue")?;
                let mut b1 = BTreeMap::new();
                b1.insert("context", context.clone());
                let answer = self.generate(self.agent_gateway, p1.render(&b1)?, cfg, seed)?;
                p1_outputs.push(answer.clone());

                let p2 = self.templates.get("p2_dialogue")?;
                let mut b2 = BTreeMap::new();
                b2.insert("context", context.clone());
                b2.insert("answer", p1_outputs.join(" "));
                let info = self.generate(self.agent_gateway, p2.render(&b2)?, cfg, seed)?;

                let p3 = self.templates.get("p3_fq")?;
                let mut b3 = BTreeMap::new();
                b3.insert("query", context);
                b3.insert("info", info);
                b3.insert("demonstrations", String::new());
                let element = self.generate(self.agent_gateway, p3.render(&b3)?, cfg, seed)?;
                Ok((format!("{answer} {element}"), Some(element)))
            }
            AgentMode::ProactiveAi => {
                let template = self.templates.get("three_in_one_dialogue_ai")?;
                let mut b = BTreeMap::new();
                b.insert("context", context);
                b.insert("demonstrations", String::new());
                let out = self.generate(self.agent_gateway, template.render(&b)?, cfg, seed)?;
                let final_text = out
                    .rfind(FINAL_RESPONSE_MARKER)
                    .map(|i| out[i + FINAL_RESPONSE_MARKER.len()..].trim().to_string())
                    .filter(|s| !s.is_empty())
                    .ok_or(Error::ParseFailed)?;
                Ok((final_text.clone(), Some(final_text)))
            }
        }
    }

    fn user_turn(&self, conv: &Conversation, cfg: &EpisodeConfig, seed: Option<u64>) -> Result<String> {
        let template = self.templates.get("sim_user")?;
        let mut b = BTreeMap::new();
        b.insert("context", conv.render());
        self.generate(self.user_gateway, template.render(&b)?, cfg, seed)
    }

    /// One full episode starting from a seed query. The episode ends
    /// naturally when the simulated user's reply is a bare acknowledgment,
    /// or at the turn cap.
    pub fn run_episode(
        &self,
        seed_query: &str,
        cfg: &EpisodeConfig,
        episode_seed: Option<u64>,
    ) -> Result<Episode> {
        let mut conv = Conversation::seeded(seed_query);
        let mut p1_outputs = Vec::new();
        let mut elements: Vec<String> = Vec::new();
        let mut repeats_flagged = 0usize;
        let mut termination_log = Vec::new();
        let mut step = 0u64;
        let mut next_seed = || {
            step += 1;
            episode_seed.map(|s| s.wrapping_mul(1_000_003).wrapping_add(step))
        };

        loop {
            let (response, element) =
                self.agent_turn(&conv, &mut p1_outputs, cfg, next_seed())?;
            if let Some(e) = &element {
                let repeated = elements.iter().any(|prev| {
                    bertscore(self.agent_gateway, e, prev)
                        .map(|s| s.f1 >= cfg.repeat_threshold)
                        .unwrap_or(false)
                });
                if repeated {
                    repeats_flagged += 1;
                }
                elements.push(e.clone());
            }
            conv.push(Role::Assistant, response);

            if conv.user_turns >= cfg.max_turns {
                conv.status = ConversationStatus::EndedCap;
                break;
            }

            let reply = self.user_turn(&conv, cfg, next_seed())?;
            let decision = terminal_decision(&reply, &cfg.cue_lexicon);
            termination_log.push(decision.clone());
            if decision.terminal {
                conv.status = ConversationStatus::EndedNatural;
                conv.closing_user_turn = Some(reply);
                break;
            }
            conv.push(Role::User, reply);
        }

        Ok(Episode {
            conversation: conv,
            mode: cfg.agent_mode,
            repeats_flagged,
            termination_log,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub turns: usize,
    pub status: ConversationStatus,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationStats {
    pub n_episodes: usize,
    pub frac_ended_after_one_turn: f64,
    pub avg_user_turns: f64,
    pub per_episode: Vec<EpisodeSummary>,
}

impl SimulationStats {
    /// Recompute the aggregates from the per-episode records; the stored
    /// aggregates must match exactly.
    pub fn from_episodes(per_episode: Vec<EpisodeSummary>) -> Self {
        let ok: Vec<&EpisodeSummary> = per_episode.iter().filter(|e| e.error.is_none()).collect();
        let n = ok.len();
        let one_turn = ok.iter().filter(|e| e.turns == 1).count();
        let total_turns: usize = ok.iter().map(|e| e.turns).sum();
        Self {
            n_episodes: n,
            frac_ended_after_one_turn: if n == 0 { 0.0 } else { one_turn as f64 / n as f64 },
            avg_user_turns: if n == 0 { 0.0 } else { total_turns as f64 / n as f64 },
            per_episode,
        }
    }

    pub fn is_internally_consistent(&self) -> bool {
        let recomputed = Self::from_episodes(self.per_episode.clone());
        recomputed.n_episodes == self.n_episodes
            && recomputed.frac_ended_after_one_turn == self.frac_ended_after_one_turn
            && recomputed.avg_user_turns == self.avg_user_turns
    }
}

/// Transcript record persisted per episode.
#[derive(Debug, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub episode_id: String,
    pub mode: AgentMode,
    pub turns: Vec<Turn>,
    pub status: ConversationStatus,
    pub user_turns: usize,
    pub repeats_flagged: usize,
    pub closing_user_turn: Option<String>,
}

/// One episode per seed query; failures are recorded per episode and the
/// batch continues. Transcripts are appended to `transcript_path` when set.
pub fn run_batch(
    simulator: &Simulator,
    seed_queries: &[String],
    cfg: &EpisodeConfig,
    seed: u64,
    transcript_path: Option<&Path>,
) -> Result<SimulationStats> {
    if seed_queries.is_empty() {
        return Err(Error::Config("no seed queries".into()));
    }
    let mut per_episode = Vec::with_capacity(seed_queries.len());
    let mut transcripts = Vec::new();
    for (idx, query) in seed_queries.iter().enumerate() {
        let episode_seed = seed.wrapping_add(idx as u64);
        match simulator.run_episode(query, cfg, Some(episode_seed)) {
            Ok(ep) => {
                per_episode.push(EpisodeSummary {
                    turns: ep.conversation.user_turns,
                    status: ep.conversation.status,
                    error: None,
                });
                transcripts.push(TranscriptRecord {
                    episode_id: format!("ep{idx:04}"),
                    mode: ep.mode,
                    turns: ep.conversation.turns,
                    status: ep.conversation.status,
                    user_turns: ep.conversation.user_turns,
                    repeats_flagged: ep.repeats_flagged,
                    closing_user_turn: ep.conversation.closing_user_turn,
                });
            }
            Err(e) => per_episode.push(EpisodeSummary {
                turns: 0,
                status: ConversationStatus::Ongoing,
                error: Some(e.to_string()),
            }),
        }
    }
    if let Some(path) = transcript_path {
        let mut body = String::new();
        for t in &transcripts {
            body.push_str(&serde_json::to_string(t)?);
            body.push('\n');
        }
        std::fs::write(path, body)?;
    }
    Ok(SimulationStats::from_episodes(per_episode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::stub::*;
    use crate::gateway::{GatewayBuilder, RetryPolicy};
    use std::sync::Arc;

    fn gateway(generation: Arc<dyn crate::gateway::GenerationBackend>) -> Gateway {
        GatewayBuilder::new(
            generation,
            Arc::new(HashEmbedding::default()),
            Arc::new(LexiconSentiment),
        )
        .retry(RetryPolicy::immediate())
        .build()
        .unwrap()
    }

    fn cues() -> Vec<String> {
        DEFAULT_CUE_LEXICON.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn terminal_rule() {
        assert!(is_terminal("Thanks for the information.", &cues()));
        assert!(is_terminal("Thank you.", &cues()));
        assert!(!is_terminal("Yes, I would like to know more.", &cues()));
        assert!(!is_terminal("Interesting?", &cues()));
        let d = terminal_decision("Yes, tell me more", &cues());
        assert!(!d.terminal);
        assert!(d.matched_cues.contains(&"tell me".to_string()));
        assert!(d.matched_cues.contains(&"yes".to_string()));
    }

    #[test]
    fn reactive_episode_ends_after_one_turn() {
        // agent answers; simulated user acknowledges and the episode ends
        let gw = gateway(Arc::new(ClosureGeneration::new("stub:sim", |req| {
            if req.prompt.contains("You are the User") {
                Ok("Thank you.".to_string())
            } else {
                Ok("Here is the answer.".to_string())
            }
        })));
        let templates = TemplateSet::builtin();
        let sim = Simulator::new(&gw, &templates);
        let ep = sim
            .run_episode("who won", &EpisodeConfig::new(AgentMode::Reactive), None)
            .unwrap();
        assert_eq!(ep.conversation.status, ConversationStatus::EndedNatural);
        assert_eq!(ep.conversation.user_turns, 1);
        assert_eq!(ep.conversation.closing_user_turn.as_deref(), Some("Thank you."));
        assert!(ep.conversation.check_alternation());
    }

    #[test]
    fn insistent_user_hits_cap() {
        let gw = gateway(Arc::new(ClosureGeneration::new("stub:insist", |req| {
            if req.prompt.contains("You are the User") {
                Ok("Tell me more?".to_string())
            } else {
                Ok("An answer.".to_string())
            }
        })));
        let templates = TemplateSet::builtin();
        let sim = Simulator::new(&gw, &templates);
        let mut cfg = EpisodeConfig::new(AgentMode::Reactive);
        cfg.max_turns = 4;
        let ep = sim.run_episode("who won", &cfg, None).unwrap();
        assert_eq!(ep.conversation.status, ConversationStatus::EndedCap);
        assert_eq!(ep.conversation.user_turns, 4);
        assert!(ep.conversation.check_alternation());
        // last user turn in the transcript is non-terminal
        let last_user = ep
            .conversation
            .turns
            .iter()
            .rev()
            .find(|t| t.role == Role::User)
            .unwrap();
        assert!(!is_terminal(&last_user.text, &cfg.cue_lexicon));
    }

    #[test]
    fn proactive_fq_accumulates_answers() {
        // P2 prompt must contain every prior P1 output concatenated
        let seen_p2: Arc<std::sync::Mutex<Vec<String>>> = Arc::default();
        let seen = Arc::clone(&seen_p2);
        let counter = std::sync::atomic::AtomicUsize::new(0);
        let gw = gateway(Arc::new(ClosureGeneration::new("stub:fq", move |req| {
            if req.prompt.contains("You are the User") {
                Ok("Yes, tell me more?".to_string())
            } else if req.prompt.contains("Answers so far:") {
                seen.lock().unwrap().push(req.prompt.clone());
                Ok("INFO".to_string())
            } else if req.prompt.contains("Follow-up question:") {
                Ok("Would you like to know INFO?".to_string())
            } else {
                let n = counter.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                Ok(format!("ANSWER{n}"))
            }
        })));
        let templates = TemplateSet::builtin();
        let sim = Simulator::new(&gw, &templates);
        let mut cfg = EpisodeConfig::new(AgentMode::ProactiveFq);
        cfg.max_turns = 3;
        let ep = sim.run_episode("who won", &cfg, None).unwrap();
        assert_eq!(ep.conversation.status, ConversationStatus::EndedCap);
        assert!(ep.conversation.check_alternation());
        let p2_prompts = seen_p2.lock().unwrap();
        assert_eq!(p2_prompts.len(), 3);
        assert!(p2_prompts[2].contains("ANSWER0 ANSWER1 ANSWER2"));
        // identical elements every round get flagged as repeats
        assert_eq!(ep.repeats_flagged, 2);
    }

    #[test]
    fn proactive_ai_parses_marker() {
        let gw = gateway(Arc::new(ClosureGeneration::new("stub:ai", |req| {
            if req.prompt.contains("You are the User") {
                Ok("Thanks.".to_string())
            } else {
                Ok("Step 1: x\nStep 2: y\nFinal response: The answer. Did you know z?".to_string())
            }
        })));
        let templates = TemplateSet::builtin();
        let sim = Simulator::new(&gw, &templates);
        let ep = sim
            .run_episode("who won", &EpisodeConfig::new(AgentMode::ProactiveAi), None)
            .unwrap();
        assert_eq!(
            ep.conversation.turns[1].text,
            "The answer. Did you know z?"
        );
        assert_eq!(ep.conversation.status, ConversationStatus::EndedNatural);
    }

    #[test]
    fn batch_stats_arithmetic() {
        // scripted: 3 episodes ending after 1, 2, 3 user turns
        let turn_budget = Arc::new(std::sync::Mutex::new(vec![1usize, 2, 3]));
        let remaining = Arc::new(std::sync::Mutex::new(0usize));
        let budget = Arc::clone(&turn_budget);
        let rem = Arc::clone(&remaining);
        let gw = gateway(Arc::new(ClosureGeneration::new("stub:batch", move |req| {
            if req.prompt.contains("You are the User") {
                let mut r = rem.lock().unwrap();
                if *r > 1 {
                    *r -= 1;
                    Ok("Yes, more please?".to_string())
                } else {
                    *r = 0;
                    Ok("Thank you.".to_string())
                }
            } else {
                // first agent call of an episode draws the next budget
                let mut r = rem.lock().unwrap();
                if *r == 0 {
                    *r = budget.lock().unwrap().remove(0);
                }
                Ok("An answer.".to_string())
            }
        })));
        let templates = TemplateSet::builtin();
        let sim = Simulator::new(&gw, &templates);
        let queries: Vec<String> = (0..3).map(|i| format!("query {i}")).collect();
        let stats = run_batch(
            &sim,
            &queries,
            &EpisodeConfig::new(AgentMode::Reactive),
            0,
            None,
        )
        .unwrap();
        assert_eq!(stats.n_episodes, 3);
        assert!((stats.frac_ended_after_one_turn - 1.0 / 3.0).abs() < 1e-12);
        assert!((stats.avg_user_turns - 2.0).abs() < 1e-12);
        assert!(stats.is_internally_consistent());
    }

    #[test]
    fn batch_records_failures_and_continues() {
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let gw = gateway(Arc::new(ClosureGeneration::new("stub:flaky", move |req| {
            let n = calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            if n == 0 {
                Err(Error::Config("boom".into()))
            } else if req.prompt.contains("You are the User") {
                Ok("Thanks.".to_string())
            } else {
                Ok("An answer.".to_string())
            }
        })));
        let templates = TemplateSet::builtin();
        let sim = Simulator::new(&gw, &templates);
        let queries = vec!["q1".to_string(), "q2".to_string()];
        let stats = run_batch(
            &sim,
            &queries,
            &EpisodeConfig::new(AgentMode::Reactive),
            0,
            None,
        )
        .unwrap();
        assert_eq!(stats.per_episode.len(), 2);
        assert!(stats.per_episode[0].error.is_some());
        assert_eq!(stats.n_episodes, 1);
    }
}
