//! The enrichment pipeline: rewrite, explore, verify, refine.
//!
//! Every language-model response is cached under (article, step,
//! prompt version) and every knowledge-base response under (article,
//! "verify:<name>", prompt version), so a warm rerun issues zero
//! client calls. Per-article failures degrade to documented fallbacks
//! and are counted; an enrichment run never aborts on one article.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::cache::{CacheKey, EnrichmentCache};
use super::llm::LlmClient;
use super::prompts::{self, PROMPT_VERSION};
use super::wikidata::{accept_hit, normalize_surface, WikidataClient, WikidataHit};
use super::VerifiedEntity;
use crate::data::vocab::tokenize;
use crate::data::{EnrichedEntity, EnrichedNews, NewsRecord};
use crate::par::par_map;

/// Which prompting strategy produces the enriched title.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptingMode {
    /// Step 1 only; entities mirror the original corpus.
    Direct,
    /// Steps 1 and 2; verified entity names are appended to the title.
    Entity,
    /// All three steps; the refined title is final.
    Hierarchical,
}

impl FromStr for PromptingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Self::Direct),
            "entity" => Ok(Self::Entity),
            "hierarchical" => Ok(Self::Hierarchical),
            other => Err(format!(
                "prompting_mode must be direct, entity or hierarchical, got {other:?}"
            )),
        }
    }
}

impl std::fmt::Display for PromptingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Direct => "direct",
            Self::Entity => "entity",
            Self::Hierarchical => "hierarchical",
        })
    }
}

/// Pipeline limits and client knobs.
#[derive(Debug, Clone, Copy)]
pub struct EnrichOptions {
    pub mode: PromptingMode,
    /// Parse and keep at most this many entities per article.
    pub max_entities: usize,
    /// Hard cap on enriched-title length, in whitespace tokens.
    pub max_title_tokens: usize,
    pub llm_max_tokens: usize,
    pub llm_temperature: f32,
}

impl Default for EnrichOptions {
    fn default() -> Self {
        Self {
            mode: PromptingMode::Hierarchical,
            max_entities: 10,
            max_title_tokens: 40,
            llm_max_tokens: 128,
            llm_temperature: 0.0,
        }
    }
}

/// Counters from one enrichment run.
#[derive(Debug, Default, Clone, Serialize)]
pub struct EnrichStats {
    pub articles: usize,
    pub llm_calls: usize,
    pub wikidata_calls: usize,
    pub cache_hits: usize,
    pub direct_fallbacks: usize,
    pub refine_fallbacks: usize,
    pub explore_failures: usize,
    pub candidates_extracted: usize,
    pub entities_verified: usize,
    pub entities_dropped: usize,
}

#[derive(Default)]
struct Counters {
    articles: AtomicUsize,
    llm_calls: AtomicUsize,
    wikidata_calls: AtomicUsize,
    cache_hits: AtomicUsize,
    direct_fallbacks: AtomicUsize,
    refine_fallbacks: AtomicUsize,
    explore_failures: AtomicUsize,
    candidates_extracted: AtomicUsize,
    entities_verified: AtomicUsize,
    entities_dropped: AtomicUsize,
}

fn bump(c: &AtomicUsize) {
    c.fetch_add(1, Ordering::Relaxed);
}

/// First `n` whitespace tokens of `s`, single-space joined.
fn truncate_words(s: &str, n: usize) -> String {
    s.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}

fn first_line(s: &str) -> Option<&str> {
    s.lines().map(str::trim).find(|l| !l.is_empty())
}

fn is_qid(id: &str) -> bool {
    let mut chars = id.chars();
    chars.next() == Some('Q') && !id[1..].is_empty() && id[1..].bytes().all(|b| b.is_ascii_digit())
}

/// Shared enrichment state for one run. Safe to drive from parallel
/// workers: clients are shared references, the cache and the
/// cross-article search memo are lock-protected, counters are atomic.
pub struct Enricher<'a> {
    llm: &'a dyn LlmClient,
    wikidata: &'a dyn WikidataClient,
    cache: &'a EnrichmentCache,
    opts: EnrichOptions,
    search_memo: Mutex<HashMap<String, Vec<WikidataHit>>>,
    counters: Counters,
}

impl<'a> Enricher<'a> {
    pub fn new(
        llm: &'a dyn LlmClient,
        wikidata: &'a dyn WikidataClient,
        cache: &'a EnrichmentCache,
        opts: EnrichOptions,
    ) -> Self {
        Self {
            llm,
            wikidata,
            cache,
            opts,
            search_memo: Mutex::new(HashMap::new()),
            counters: Counters::default(),
        }
    }

    pub fn stats(&self) -> EnrichStats {
        let c = &self.counters;
        EnrichStats {
            articles: c.articles.load(Ordering::Relaxed),
            llm_calls: c.llm_calls.load(Ordering::Relaxed),
            wikidata_calls: c.wikidata_calls.load(Ordering::Relaxed),
            cache_hits: c.cache_hits.load(Ordering::Relaxed),
            direct_fallbacks: c.direct_fallbacks.load(Ordering::Relaxed),
            refine_fallbacks: c.refine_fallbacks.load(Ordering::Relaxed),
            explore_failures: c.explore_failures.load(Ordering::Relaxed),
            candidates_extracted: c.candidates_extracted.load(Ordering::Relaxed),
            entities_verified: c.entities_verified.load(Ordering::Relaxed),
            entities_dropped: c.entities_dropped.load(Ordering::Relaxed),
        }
    }

    fn put_cached(&self, key: &CacheKey, value: &str) {
        if let Err(e) = self.cache.put(key, value) {
            log::warn!("cache append failed for {}/{}: {e}", key.news_id, key.step);
        }
    }

    /// Completion with at-most-once client invocation per key.
    fn complete_cached(&self, news_id: &str, step: &str, prompt: &str) -> Result<String, super::EnrichError> {
        let key = CacheKey::new(news_id, step, PROMPT_VERSION);
        if let Some(v) = self.cache.get(&key) {
            bump(&self.counters.cache_hits);
            return Ok(v);
        }
        bump(&self.counters.llm_calls);
        let v = self
            .llm
            .complete(prompt, self.opts.llm_max_tokens, self.opts.llm_temperature)?;
        self.put_cached(&key, &v);
        Ok(v)
    }

    /// Step 1: candidate title, falling back to the original on client
    /// failure or an all-whitespace response.
    pub fn direct_prompt(&self, news: &NewsRecord) -> String {
        match self.complete_cached(&news.news_id, "direct", &prompts::direct_prompt_text(news)) {
            Ok(resp) => match first_line(&resp) {
                Some(line) => line.to_string(),
                None => {
                    bump(&self.counters.direct_fallbacks);
                    news.title.clone()
                }
            },
            Err(e) => {
                log::warn!("direct prompt failed for {}: {e}", news.news_id);
                bump(&self.counters.direct_fallbacks);
                news.title.clone()
            }
        }
    }

    /// Step 2: entity surface names, deduplicated case-insensitively,
    /// at most `max_entities` of them. Client failure yields an empty
    /// list, never an abort.
    pub fn explore_entities(&self, news: &NewsRecord) -> Vec<String> {
        let resp = match self.complete_cached(&news.news_id, "explore", &prompts::explore_prompt_text(news)) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("entity exploration failed for {}: {e}", news.news_id);
                bump(&self.counters.explore_failures);
                return Vec::new();
            }
        };
        let mut seen = Vec::new();
        let mut out = Vec::new();
        for line in resp.lines() {
            let name = line.trim().trim_start_matches(['-', '*', ' ']).trim();
            if name.is_empty() {
                continue;
            }
            let folded = name.to_lowercase();
            if seen.contains(&folded) {
                continue;
            }
            seen.push(folded);
            out.push(name.to_string());
            if out.len() == self.opts.max_entities {
                break;
            }
        }
        self.counters
            .candidates_extracted
            .fetch_add(out.len(), Ordering::Relaxed);
        out
    }

    /// Verifies one surface name. Search responses are cached per
    /// article and memoized across articles, so a repeated name costs
    /// one remote call per run and zero on a warm cache. Unverifiable
    /// or unreachable names are dropped and counted.
    pub fn verify_entity(&self, news_id: &str, surface: &str) -> Option<VerifiedEntity> {
        let norm = normalize_surface(surface);
        if norm.is_empty() {
            bump(&self.counters.entities_dropped);
            return None;
        }
        let key = CacheKey::new(news_id, &format!("verify:{norm}"), PROMPT_VERSION);
        let hits: Vec<WikidataHit> = if let Some(raw) = self.cache.get(&key) {
            match serde_json::from_str(&raw) {
                Ok(h) => {
                    bump(&self.counters.cache_hits);
                    h
                }
                Err(_) => Vec::new(),
            }
        } else {
            let memoized = self.search_memo.lock().expect("memo poisoned").get(&norm).cloned();
            let hits = match memoized {
                Some(h) => h,
                None => {
                    bump(&self.counters.wikidata_calls);
                    match self.wikidata.search(surface) {
                        Ok(h) => {
                            self.search_memo
                                .lock()
                                .expect("memo poisoned")
                                .insert(norm.clone(), h.clone());
                            h
                        }
                        Err(e) => {
                            log::warn!("entity search failed for {surface:?}: {e}");
                            bump(&self.counters.entities_dropped);
                            return None;
                        }
                    }
                }
            };
            self.put_cached(&key, &serde_json::to_string(&hits).expect("hits always serialize"));
            hits
        };
        match accept_hit(surface, &hits) {
            // a verified entity must carry a canonical Q-number id
            Some(hit) if is_qid(&hit.qid) => {
                bump(&self.counters.entities_verified);
                Some(VerifiedEntity {
                    canonical_name: hit.label.clone(),
                    wikidata_id: hit.qid.clone(),
                })
            }
            _ => {
                bump(&self.counters.entities_dropped);
                None
            }
        }
    }

    /// Step 3: final title, falling back to the candidate on failure.
    pub fn hierarchical_refine(&self, news: &NewsRecord, candidate: &str, entity_names: &[&str]) -> String {
        let prompt = prompts::refine_prompt_text(news, candidate, entity_names);
        match self.complete_cached(&news.news_id, "refine", &prompt) {
            Ok(resp) => match first_line(&resp) {
                Some(line) => line.to_string(),
                None => {
                    bump(&self.counters.refine_fallbacks);
                    candidate.to_string()
                }
            },
            Err(e) => {
                log::warn!("refine failed for {}: {e}", news.news_id);
                bump(&self.counters.refine_fallbacks);
                candidate.to_string()
            }
        }
    }

    /// Explores and verifies entities for one article, deduplicating
    /// by canonical id with first occurrence kept.
    fn verified_entities(&self, news: &NewsRecord) -> Vec<EnrichedEntity> {
        let mut out: Vec<EnrichedEntity> = Vec::new();
        for surface in self.explore_entities(news) {
            if let Some(v) = self.verify_entity(&news.news_id, &surface) {
                if !out.iter().any(|e| e.qid == v.wikidata_id) {
                    out.push(EnrichedEntity {
                        name: v.canonical_name,
                        qid: v.wikidata_id,
                    });
                }
            }
            if out.len() == self.opts.max_entities {
                break;
            }
        }
        out
    }

    /// Runs the configured strategy on one article.
    pub fn enrich_one(&self, news: &NewsRecord) -> EnrichedNews {
        bump(&self.counters.articles);
        let candidate = self.direct_prompt(news);
        let (title, entities) = match self.opts.mode {
            PromptingMode::Direct => {
                // entities mirror the original corpus annotations
                let mut entities: Vec<EnrichedEntity> = Vec::new();
                for e in &news.title_entities {
                    if !e.wikidata_id.is_empty() && !entities.iter().any(|x| x.qid == e.wikidata_id) {
                        entities.push(EnrichedEntity {
                            name: e.name.clone(),
                            qid: e.wikidata_id.clone(),
                        });
                    }
                }
                entities.truncate(self.opts.max_entities);
                (candidate, entities)
            }
            PromptingMode::Entity => {
                let entities = self.verified_entities(news);
                let title = if entities.is_empty() {
                    candidate
                } else {
                    let names: Vec<&str> = entities.iter().map(|e| e.name.as_str()).collect();
                    format!("{candidate} {}", names.join(" "))
                };
                (title, entities)
            }
            PromptingMode::Hierarchical => {
                let entities = self.verified_entities(news);
                let names: Vec<&str> = entities.iter().map(|e| e.name.as_str()).collect();
                let title = self.hierarchical_refine(news, &candidate, &names);
                (title, entities)
            }
        };
        let mut title = truncate_words(&title, self.opts.max_title_tokens);
        if tokenize(&title).is_empty() {
            // keep the invariant that an enriched title carries at
            // least one usable token
            title = truncate_words(&news.title, self.opts.max_title_tokens);
            if tokenize(&title).is_empty() {
                title = "untitled".to_string();
            }
        }
        EnrichedNews {
            news_id: news.news_id.clone(),
            enriched_title: title,
            enriched_entities: entities,
            prompt_version: PROMPT_VERSION.to_string(),
        }
    }
}

/// Enriches a corpus, fanning articles out across the worker pool.
/// Output order matches input order.
pub fn enrich_corpus(
    corpus: &[NewsRecord],
    llm: &dyn LlmClient,
    wikidata: &dyn WikidataClient,
    cache: &EnrichmentCache,
    opts: EnrichOptions,
) -> (Vec<EnrichedNews>, EnrichStats) {
    let enricher = Enricher::new(llm, wikidata, cache, opts);
    let out = par_map(corpus, |n| enricher.enrich_one(n));
    (out, enricher.stats())
}
