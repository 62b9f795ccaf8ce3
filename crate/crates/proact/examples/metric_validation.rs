//! Validating a metric against binary human labels with the point-biserial
//! correlation, then scoring a labeled batch and correlating per metric.

use std::sync::Arc;

use proact::corpus::{load_corpus, Label};
use proact::gateway::stub::{EchoGeneration, HashEmbedding, LexiconSentiment};
use proact::gateway::GatewayBuilder;
use proact::promptcraft::TemplateSet;
use proact::scoring::{point_biserial, score_batch, Metric, ScoringConfig};

fn main() -> proact::Result<()> {
    // a metric that separates the classes perfectly correlates near 1
    let labels = [true, true, false, false];
    let scores = [1.0, 0.9, 0.1, 0.0];
    println!("separating metric  r = {:.4}", point_biserial(&labels, &scores)?);

    // an uninformative metric correlates near 0
    let noise = [0.5, 0.4, 0.5, 0.4];
    println!("noisy metric       r = {:.4}", point_biserial(&labels, &noise)?);

    // correlate the semantic metric with the labels shipped in the corpus
    let gateway = GatewayBuilder::new(
        Arc::new(EchoGeneration),
        Arc::new(HashEmbedding::default()),
        Arc::new(LexiconSentiment),
    )
    .build()?;
    let templates = TemplateSet::builtin();
    let corpus = load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_corpus.jsonl"))?;
    let labeled: Vec<_> = corpus.into_iter().filter(|s| s.label.is_some()).collect();
    let reports = score_batch(&gateway, &templates, &labeled, &[Metric::Semantic], &ScoringConfig::default())?;

    let (labels, scores): (Vec<bool>, Vec<f64>) = labeled
        .iter()
        .zip(&reports)
        .filter_map(|(s, r)| r.semantic.map(|v| (s.label == Some(Label::Valid), v)))
        .unzip();
    println!(
        "\nsemantic metric vs corpus labels over {} samples: r = {:.4}",
        labels.len(),
        point_biserial(&labels, &scores)?
    );
    Ok(())
}
