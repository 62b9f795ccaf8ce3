//! Reactive vs proactive agents against a simulated user. The scripted
//! user keeps asking while the agent offers something new, so proactive
//! modes sustain longer conversations.

use std::sync::Arc;

use proact::gateway::stub::{ClosureGeneration, HashEmbedding, LexiconSentiment};
use proact::gateway::GatewayBuilder;
use proact::promptcraft::TemplateSet;
use proact::simulation::{run_batch, AgentMode, EpisodeConfig, Simulator};

fn main() -> proact::Result<()> {
    // the simulated user accepts offers ("yes, tell me more?") but has
    // nothing to add after a bare answer
    let gateway = GatewayBuilder::new(
        Arc::new(ClosureGeneration::new("stub:world", |req| {
            let p = &req.prompt;
            Ok(if p.contains("You are the User") {
                if p.contains("like to know") {
                    "Yes, tell me more?".to_string()
                } else {
                    "Thanks, that answers it.".to_string()
                }
            } else if p.contains("Answers so far:") {
                format!("related fact #{}", p.len() % 97)
            } else if p.contains("Follow-up question:") {
                format!("Would you like to know related fact #{}?", p.len() % 97)
            } else {
                "Here is the answer.".to_string()
            })
        })),
        Arc::new(HashEmbedding::default()),
        Arc::new(LexiconSentiment),
    )
    .build()?;
    let templates = TemplateSet::builtin();
    let simulator = Simulator::new(&gateway, &templates);

    let queries: Vec<String> = (0..5).map(|i| format!("seed query number {i}")).collect();
    for mode in [AgentMode::Reactive, AgentMode::ProactiveFq] {
        let mut cfg = EpisodeConfig::new(mode);
        cfg.max_turns = 6;
        let stats = run_batch(&simulator, &queries, &cfg, 7, None)?;
        println!(
            "{mode:?}: {} episodes, ended after one turn {:.0}%, avg user turns {:.1}",
            stats.n_episodes,
            100.0 * stats.frac_ended_after_one_turn,
            stats.avg_user_turns
        );
    }
    Ok(())
}
