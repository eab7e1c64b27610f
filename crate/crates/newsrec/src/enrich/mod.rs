//! Article enrichment: prompt a language model to rewrite titles and
//! surface entities, verify entities against a knowledge base, and
//! persist the results as a model-agnostic corpus file.

pub mod cache;
pub mod llm;
pub mod pipeline;
pub mod prompts;
pub mod wikidata;

pub use cache::{CacheKey, EnrichmentCache};
pub use llm::{HttpLlm, LlmClient, MockLlm};
pub use pipeline::{enrich_corpus, EnrichOptions, EnrichStats, Enricher, PromptingMode};
pub use wikidata::{normalize_surface, FixtureWikidata, LiveWikidata, WikidataClient, WikidataHit};

/// One extracted entity surface before and after verification.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityCandidate {
    pub surface_name: String,
    pub verified: Option<VerifiedEntity>,
}

/// Canonical identity a surface name resolved to.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifiedEntity {
    pub canonical_name: String,
    pub wikidata_id: String,
}

/// Failures from enrichment clients and the cache. All per-article
/// paths degrade to fallbacks; these errors surface only from cache
/// I/O and client internals.
#[derive(Debug, thiserror::Error)]
pub enum EnrichError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("empty response")]
    EmptyResponse,
    #[error("cache io: {0}")]
    CacheIo(#[from] std::io::Error),
    #[error("fixture: {0}")]
    Fixture(String),
}
