//! The three response-generation pipelines against a scripted "model":
//! direct prompting, the three-step chain (answer, related information,
//! proactive element), and the single-call three-in-one variant.

use std::sync::Arc;

use proact::corpus::ElementKind;
use proact::gateway::stub::{ClosureGeneration, HashEmbedding, LexiconSentiment};
use proact::gateway::GatewayBuilder;
use proact::promptcraft::{PipelineRunner, TemplateSet};

fn main() -> proact::Result<()> {
    // route on prompt shape so each stage gets a plausible reply
    let gateway = GatewayBuilder::new(
        Arc::new(ClosureGeneration::new("stub:model", |req| {
            let p = &req.prompt;
            Ok(if p.contains("Related information:") {
                "She wrote it at eighteen during a stay at Lake Geneva.".to_string()
            } else if p.contains("Follow-up question:") {
                "Would you like to hear how old she was when she wrote it?".to_string()
            } else if p.contains("Final response:") {
                "Step 1: Mary Shelley wrote Frankenstein.\n\
                 Step 2: She was eighteen when she started it.\n\
                 Step 3: Would you like to hear how old she was?\n\
                 Final response: Mary Shelley wrote Frankenstein. Would you like to hear how old she was?"
                    .to_string()
            } else {
                "Frankenstein was written by Mary Shelley.".to_string()
            })
        })),
        Arc::new(HashEmbedding::default()),
        Arc::new(LexiconSentiment),
    )
    .build()?;
    let templates = TemplateSet::builtin();
    let runner = PipelineRunner::new(&gateway, &templates);
    let query = "who wrote the novel frankenstein";

    let direct = runner.run_direct(query, ElementKind::FollowUpQuestion, &[], 0)?;
    println!("direct:\n  {}\n", direct.final_response.full_text);

    let three_step = runner.run_three_step(query, ElementKind::FollowUpQuestion, &[], 0)?;
    for (stage, out) in &three_step.intermediate {
        println!("3-step {stage:?}: {out}");
    }
    // final response = answer + " " + element
    println!("3-step final:\n  {}\n", three_step.final_response.full_text);

    let three_in_one = runner.run_three_in_one(query, ElementKind::FollowUpQuestion, &[], 0)?;
    println!("3-in-1 final (parsed after the marker):\n  {}", three_in_one.final_response.full_text);
    Ok(())
}
