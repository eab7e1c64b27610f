//! Corpus domain types and loaders: click logs, article metadata,
//! pretrained embeddings, and training-example assembly.

pub mod embeddings;
pub mod mind;
pub mod sampling;
pub mod vocab;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// One entity mention attached to an article title.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMention {
    pub name: String,
    pub wikidata_id: String,
    pub confidence: f64,
}

/// One article as read from the news corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct NewsRecord {
    pub news_id: String,
    pub category: String,
    pub subcategory: String,
    pub title: String,
    pub abstract_text: String,
    pub title_entities: Vec<EntityMention>,
}

/// Verified entity attached to an enriched article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedEntity {
    pub name: String,
    pub qid: String,
}

/// Enriched form of one article: rewritten title plus verified,
/// QID-deduplicated entities, tagged with the prompt version that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrichedNews {
    pub news_id: String,
    pub enriched_title: String,
    pub enriched_entities: Vec<EnrichedEntity>,
    pub prompt_version: String,
}

/// One impression from the behavior log: what the user had clicked
/// before, and the shown candidates with click labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Impression {
    pub impression_id: String,
    pub user_id: String,
    pub timestamp: String,
    pub history: Vec<String>,
    pub candidates: Vec<(String, u8)>,
}

/// Errors from corpus and embedding readers. Per-row damage is counted
/// in stats instead; this type is for unreadable or structurally
/// broken files.
#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
}

/// Index of a parsed corpus by article id.
pub fn corpus_map(corpus: &[NewsRecord]) -> HashMap<&str, &NewsRecord> {
    corpus.iter().map(|n| (n.news_id.as_str(), n)).collect()
}

/// Index of enriched records by article id.
pub fn enriched_map(enriched: &[EnrichedNews]) -> HashMap<&str, &EnrichedNews> {
    enriched.iter().map(|n| (n.news_id.as_str(), n)).collect()
}
