//! Index-grid assembly and negative sampling.
//!
//! Articles are resolved to fixed-size padded id grids once, then
//! impressions become training examples of one clicked candidate plus
//! K sampled non-clicked ones. Sampling randomness is derived per
//! impression from hash(seed, impression_id), so output is invariant
//! to how impressions are sharded across workers.

use std::collections::HashMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{tokenize, Vocab, PAD_ID, UNK_ID};
use super::{EnrichedNews, NewsRecord};
use crate::hash::fnv1a64_pair;

/// Which entity list feeds the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntitySource {
    Original,
    Enriched,
    Union,
}

impl FromStr for EntitySource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(Self::Original),
            "enriched" => Ok(Self::Enriched),
            "union" => Ok(Self::Union),
            other => Err(format!(
                "entity_source must be original, enriched or union, got {other:?}"
            )),
        }
    }
}

impl std::fmt::Display for EntitySource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Original => "original",
            Self::Enriched => "enriched",
            Self::Union => "union",
        })
    }
}

/// One article resolved to padded id grids. Mask entries are true
/// exactly at non-pad positions. Hash and Eq let encoders reuse one
/// computation for repeated articles.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NewsIndices {
    pub tokens: Vec<u32>,
    pub token_mask: Vec<bool>,
    pub entities: Vec<u32>,
    pub entity_mask: Vec<bool>,
    pub category: u32,
    pub subcategory: u32,
}

impl NewsIndices {
    /// All-padding grids for unused history slots.
    pub fn padding(max_tokens: usize, max_entities: usize) -> Self {
        Self {
            tokens: vec![PAD_ID; max_tokens],
            token_mask: vec![false; max_tokens],
            entities: vec![PAD_ID; max_entities],
            entity_mask: vec![false; max_entities],
            category: PAD_ID,
            subcategory: PAD_ID,
        }
    }

    pub fn has_entities(&self) -> bool {
        self.entity_mask.iter().any(|&m| m)
    }
}

/// Grid size limits and the entity-source switch.
#[derive(Debug, Clone, Copy)]
pub struct IndexerConfig {
    pub max_title_tokens: usize,
    pub max_entities: usize,
    pub max_history: usize,
    pub entity_source: EntitySource,
}

impl Default for IndexerConfig {
    fn default() -> Self {
        Self {
            max_title_tokens: 40,
            max_entities: 10,
            max_history: 50,
            entity_source: EntitySource::Enriched,
        }
    }
}

/// The title the model sees for an article: the rewritten one when
/// present.
pub fn effective_title<'a>(news: &'a NewsRecord, enriched: Option<&'a EnrichedNews>) -> &'a str {
    match enriched {
        Some(e) => &e.enriched_title,
        None => &news.title,
    }
}

/// QIDs the model sees, deduplicated keep-first, per `source`.
/// Entities with empty QIDs are unusable for embedding lookup and are
/// skipped. Articles without an enriched record fall back to the
/// original mentions under every source.
pub fn effective_entity_qids<'a>(
    news: &'a NewsRecord,
    enriched: Option<&'a EnrichedNews>,
    source: EntitySource,
) -> Vec<&'a str> {
    let original = || news.title_entities.iter().map(|e| e.wikidata_id.as_str());
    let mut qids: Vec<&str> = Vec::new();
    let mut push = |q: &'a str| {
        if !q.is_empty() && !qids.contains(&q) {
            qids.push(q);
        }
    };
    match (source, enriched) {
        (EntitySource::Original, _) | (EntitySource::Enriched, None) | (EntitySource::Union, None) => {
            original().for_each(&mut push);
        }
        (EntitySource::Enriched, Some(e)) => {
            e.enriched_entities.iter().for_each(|x| push(&x.qid));
        }
        (EntitySource::Union, Some(e)) => {
            original().for_each(&mut push);
            e.enriched_entities.iter().for_each(|x| push(&x.qid));
        }
    }
    qids
}

/// Resolves articles to [`NewsIndices`] against fixed vocabularies,
/// preferring enriched titles and entities where available.
pub struct NewsIndexer<'a> {
    words: &'a Vocab,
    entities: &'a Vocab,
    categories: &'a Vocab,
    subcategories: Option<&'a Vocab>,
    enriched: HashMap<&'a str, &'a EnrichedNews>,
    cfg: IndexerConfig,
}

impl<'a> NewsIndexer<'a> {
    pub fn new(
        words: &'a Vocab,
        entities: &'a Vocab,
        categories: &'a Vocab,
        enriched: &'a [EnrichedNews],
        cfg: IndexerConfig,
    ) -> Self {
        Self {
            words,
            entities,
            categories,
            subcategories: None,
            enriched: enriched.iter().map(|e| (e.news_id.as_str(), e)).collect(),
            cfg,
        }
    }

    /// Enables subcategory resolution. Without this the subcategory
    /// slot holds the OOV id, which models ignore unless configured
    /// to consume subcategories.
    pub fn with_subcategories(mut self, subcategories: &'a Vocab) -> Self {
        self.subcategories = Some(subcategories);
        self
    }

    pub fn config(&self) -> IndexerConfig {
        self.cfg
    }

    /// The title the model sees: the rewritten one when present.
    pub fn effective_title(&self, news: &'a NewsRecord) -> &'a str {
        effective_title(news, self.enriched.get(news.news_id.as_str()).copied())
    }

    /// QIDs the model sees, deduplicated keep-first, per the
    /// configured source.
    pub fn effective_entity_qids(&self, news: &'a NewsRecord) -> Vec<&'a str> {
        effective_entity_qids(
            news,
            self.enriched.get(news.news_id.as_str()).copied(),
            self.cfg.entity_source,
        )
    }

    /// Builds the padded grids for one article. A title with no
    /// usable tokens gets the single OOV token so attention always has
    /// one live position; entities absent from the entity vocabulary
    /// are dropped rather than mapped to OOV.
    pub fn index(&self, news: &'a NewsRecord) -> NewsIndices {
        let t_max = self.cfg.max_title_tokens;
        let e_max = self.cfg.max_entities;

        let mut tokens: Vec<u32> = tokenize(self.effective_title(news))
            .into_iter()
            .take(t_max)
            .map(|t| self.words.id(&t))
            .collect();
        if tokens.is_empty() {
            tokens.push(UNK_ID);
        }
        let mut token_mask = vec![true; tokens.len()];
        tokens.resize(t_max.max(1), PAD_ID);
        token_mask.resize(t_max.max(1), false);

        let mut entities: Vec<u32> = self
            .effective_entity_qids(news)
            .into_iter()
            .filter(|q| self.entities.contains(q))
            .take(e_max)
            .map(|q| self.entities.id(q))
            .collect();
        let mut entity_mask = vec![true; entities.len()];
        entities.resize(e_max, PAD_ID);
        entity_mask.resize(e_max, false);

        NewsIndices {
            tokens,
            token_mask,
            entities,
            entity_mask,
            category: self.categories.id(&news.category),
            subcategory: self
                .subcategories
                .map_or(UNK_ID, |v| v.id(&news.subcategory)),
        }
    }
}

/// One (1+K)-way training instance. Candidate slot 0 is the clicked
/// article; the target index is always 0.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub impression_id: String,
    pub history: Vec<NewsIndices>,
    pub history_mask: Vec<bool>,
    pub candidates: Vec<NewsIndices>,
    pub target: usize,
}

/// Counters from one example-assembly pass.
#[derive(Debug, Default, Clone, Serialize)]
pub struct SamplingStats {
    pub examples: usize,
    pub skipped_empty_history: usize,
    pub skipped_no_positive: usize,
    pub skipped_no_negatives: usize,
    pub dropped_history_items: usize,
    pub dropped_candidates: usize,
}

/// Expands impressions into training examples: one per clicked
/// candidate, each with K negatives sampled uniformly from that
/// impression's non-clicked candidates, without replacement when the
/// pool allows and with replacement otherwise. Impressions with no
/// click or no usable history are skipped and counted.
pub fn make_training_examples(
    impressions: &[super::Impression],
    corpus: &HashMap<&str, &NewsRecord>,
    indexer: &NewsIndexer,
    k: usize,
    seed: u64,
) -> (Vec<TrainingExample>, SamplingStats) {
    let mut stats = SamplingStats::default();
    let mut examples = Vec::new();
    let h_max = indexer.config().max_history;
    let t_max = indexer.config().max_title_tokens;
    let e_max = indexer.config().max_entities;

    for imp in impressions {
        if imp.history.is_empty() {
            stats.skipped_empty_history += 1;
            continue;
        }
        let mut positives: Vec<&NewsRecord> = Vec::new();
        let mut pool: Vec<&NewsRecord> = Vec::new();
        for (id, label) in &imp.candidates {
            match corpus.get(id.as_str()) {
                Some(n) if *label == 1 => positives.push(n),
                Some(n) => pool.push(n),
                None => stats.dropped_candidates += 1,
            }
        }
        if positives.is_empty() {
            stats.skipped_no_positive += 1;
            continue;
        }

        // most recent history first truncated, then resolved
        let recent = &imp.history[imp.history.len().saturating_sub(h_max)..];
        let mut history: Vec<NewsIndices> = Vec::with_capacity(recent.len());
        for id in recent {
            match corpus.get(id.as_str()) {
                Some(n) => history.push(indexer.index(n)),
                None => stats.dropped_history_items += 1,
            }
        }
        if history.is_empty() {
            stats.skipped_empty_history += 1;
            continue;
        }
        let mut history_mask = vec![true; history.len()];
        history.resize(h_max, NewsIndices::padding(t_max, e_max));
        history_mask.resize(h_max, false);

        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64_pair(seed, &imp.impression_id));
        for pos in &positives {
            if pool.is_empty() {
                stats.skipped_no_negatives += 1;
                continue;
            }
            let negatives: Vec<&NewsRecord> = if pool.len() >= k {
                // partial Fisher-Yates over pool indices
                let mut order: Vec<usize> = (0..pool.len()).collect();
                for j in 0..k {
                    let pick = rng.gen_range(j..order.len());
                    order.swap(j, pick);
                }
                order[..k].iter().map(|&i| pool[i]).collect()
            } else {
                (0..k).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
            };
            let mut candidates = Vec::with_capacity(1 + k);
            candidates.push(indexer.index(pos));
            candidates.extend(negatives.iter().map(|n| indexer.index(n)));
            examples.push(TrainingExample {
                impression_id: imp.impression_id.clone(),
                history: history.clone(),
                history_mask: history_mask.clone(),
                candidates,
                target: 0,
            });
            stats.examples += 1;
        }
    }
    (examples, stats)
}
