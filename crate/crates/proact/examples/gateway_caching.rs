//! Gateway plumbing: deterministic generations are cached on disk (and
//! survive a restart), failures are retried, and sampled generations are
//! never cached.

use std::sync::Arc;

use proact::gateway::stub::{CountingGeneration, EchoGeneration, HashEmbedding, LexiconSentiment};
use proact::gateway::{GatewayBuilder, GenerationRequest, RetryPolicy};

fn main() -> proact::Result<()> {
    let cache_dir = std::env::temp_dir().join("proact_gateway_example_cache");
    let _ = std::fs::remove_dir_all(&cache_dir);

    let build = || -> proact::Result<_> {
        GatewayBuilder::new(
            Arc::new(CountingGeneration::new(EchoGeneration)),
            Arc::new(HashEmbedding::default()),
            Arc::new(LexiconSentiment),
        )
        .cache_dir(&cache_dir)
        .retry(RetryPolicy::immediate())
        .build()
    };

    let gateway = build()?;
    let deterministic = GenerationRequest::new("what is the capital of france", 0.0, 64);
    gateway.generate(&deterministic)?;
    gateway.generate(&deterministic)?; // served from cache
    println!("backend profile hash: {}", gateway.profile().hash());

    // a fresh gateway over the same cache dir still hits the cache
    let gateway = build()?;
    let cached = gateway.generate(&deterministic)?;
    println!("after restart, cached reply: {:.40}...", cached);

    // sampled requests (temperature > 0, no seed) bypass the cache
    let sampled = GenerationRequest::new("what is the capital of france", 0.8, 64);
    gateway.generate(&sampled)?;
    gateway.generate(&sampled)?;
    println!("cache dir: {}", cache_dir.display());
    Ok(())
}
