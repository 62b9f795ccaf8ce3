//! User-simulation metric: draw n simulated user replies to a candidate
//! response and average their positive sentiment. Scripted stubs make the
//! arithmetic visible.

use std::sync::Arc;

use proact::corpus::ProactiveResponse;
use proact::gateway::stub::{ClosureGeneration, HashEmbedding, ScriptedSentiment};
use proact::gateway::GatewayBuilder;
use proact::promptcraft::TemplateSet;
use proact::scoring::{user_sim_score, UserSimConfig};
use proact::simulation::Conversation;

fn main() -> proact::Result<()> {
    // the "user model" always replies the same way; the sentiment stub
    // pops a scripted positive probability per draw
    let gateway = GatewayBuilder::new(
        Arc::new(ClosureGeneration::new("stub:user", |_| {
            Ok("Sure, that sounds interesting.".to_string())
        })),
        Arc::new(HashEmbedding::default()),
        Arc::new(ScriptedSentiment::new([0.9, 0.5, 0.1])),
    )
    .build()?;
    let templates = TemplateSet::builtin();

    let response = ProactiveResponse::with_element(
        "Frankenstein was written by Mary Shelley.",
        "Would you like to know how old she was when she wrote it?",
        proact::corpus::ElementKind::FollowUpQuestion,
    )?;
    let context = Conversation::seeded("who wrote the novel frankenstein");

    let cfg = UserSimConfig {
        n: 3,
        ..UserSimConfig::default()
    };
    let score = user_sim_score(&gateway, &templates, &response, &context, &cfg)?;
    // mean of {0.9, 0.5, 0.1}
    println!("user-simulation score over 3 draws: {score:.4}");
    Ok(())
}
