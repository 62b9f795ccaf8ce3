//! The semantic-similarity proactiveness metric, end to end on stub
//! embeddings: BERTScore, mean pairwise segment similarity, and the
//! kind-dependent combination rule.

use std::sync::Arc;

use proact::corpus::{ElementKind, ProactiveResponse};
use proact::gateway::stub::{EchoGeneration, HashEmbedding, LexiconSentiment};
use proact::gateway::GatewayBuilder;
use proact::scoring::{bertscore, semantic_combine, semantic_score, SemanticConfig};

fn main() -> proact::Result<()> {
    let gateway = GatewayBuilder::new(
        Arc::new(EchoGeneration),
        Arc::new(HashEmbedding::default()),
        Arc::new(LexiconSentiment),
    )
    .build()?;

    // the BERTScore primitive
    let same = bertscore(&gateway, "the capital of france", "the capital of france")?;
    let other = bertscore(&gateway, "the capital of france", "penguins live in antarctica")?;
    println!("identical texts   F1 = {:.4}", same.f1);
    println!("unrelated texts   F1 = {:.4}", other.f1);

    // the combination rule alone: alpha * BS(Q,R) + (1 - alpha) * T
    // where T is the mean pairwise segment similarity for follow-up
    // questions and its complement for additional information
    let (bs_qr, pairwise, alpha) = (0.6, 0.8, 0.5);
    println!(
        "\ncombine(bs={bs_qr}, pairwise={pairwise}): FQ {:.2}, AI {:.2}",
        semantic_combine(alpha, bs_qr, Some(pairwise), ElementKind::FollowUpQuestion),
        semantic_combine(alpha, bs_qr, Some(pairwise), ElementKind::AdditionalInformation),
    );

    // full metric on structured responses. For FQ a specific follow-up
    // question that echoes the answer's topic scores higher than an
    // off-topic one; for AI a rephrase of the answer is penalized.
    let query = "who wrote the novel frankenstein";
    let cfg = SemanticConfig::default();

    let specific = ProactiveResponse::with_element(
        "Frankenstein was written by Mary Shelley.",
        "Would you like to know when Mary Shelley wrote Frankenstein?",
        ElementKind::FollowUpQuestion,
    )?;
    let vague = ProactiveResponse::with_element(
        "Frankenstein was written by Mary Shelley.",
        "Is there anything else at all?",
        ElementKind::FollowUpQuestion,
    )?;
    println!("\nFQ specific  {:.4}", semantic_score(&gateway, query, &specific, ElementKind::FollowUpQuestion, &cfg)?);
    println!("FQ vague     {:.4}", semantic_score(&gateway, query, &vague, ElementKind::FollowUpQuestion, &cfg)?);

    let informative = ProactiveResponse::with_element(
        "Frankenstein was written by Mary Shelley.",
        "She started the story at eighteen during a rainy summer in Geneva.",
        ElementKind::AdditionalInformation,
    )?;
    let rephrase = ProactiveResponse::with_element(
        "Frankenstein was written by Mary Shelley.",
        "Frankenstein was written by Mary Shelley.",
        ElementKind::AdditionalInformation,
    )?;
    println!("\nAI informative {:.4}", semantic_score(&gateway, query, &informative, ElementKind::AdditionalInformation, &cfg)?);
    println!("AI rephrase    {:.4}", semantic_score(&gateway, query, &rephrase, ElementKind::AdditionalInformation, &cfg)?);
    Ok(())
}
