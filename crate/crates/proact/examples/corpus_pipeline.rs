//! Load the bundled corpus, inspect it, filter it, split it into train and
//! test, and export the train half as instruction-tuning pairs.

use proact::corpus::{corpus_stats, export_sft, filter_corpus, load_corpus, split_corpus, Split};

fn main() -> proact::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_corpus.jsonl");
    let samples = load_corpus(path)?;

    let stats = corpus_stats(&samples)?;
    println!("loaded {} samples", stats.n_samples);
    println!("avg query tokens    {:.3}", stats.avg_query_tokens);
    println!("avg response tokens {:.3}", stats.avg_response_tokens);
    for (kind, ks) in &stats.per_kind {
        println!("  {}: {} samples, {:.1} response tokens", kind.short(), ks.n_samples, ks.avg_response_tokens);
    }

    // keep queries between 3 and 20 tokens with a substantial long answer
    let kept = filter_corpus(&samples, 3, 20, 10)?;
    println!("\nfilter kept {} of {}", kept.len(), samples.len());

    // deterministic: same ids + same seed -> same assignment
    let tagged = split_corpus(&kept, 8, 42)?;
    let train: Vec<_> = tagged.iter().filter(|s| s.split == Split::Train).cloned().collect();
    println!("split: {} train / {} test", train.len(), tagged.len() - train.len());

    let out = std::env::temp_dir().join("proact_sft_example.jsonl");
    let n = export_sft(&train, "Answer the following query proactively: {query}", &out)?;
    println!("wrote {n} instruction/response pairs to {}", out.display());
    Ok(())
}
