//! Deterministic synthetic datasets: a themed news corpus with
//! matching behavior logs, pretrained-vector files, an offline
//! entity-search fixture, and a linearly separable two-group dataset
//! for overfitting checks. Everything is a pure function of its seed,
//! keyed per item, so output does not depend on generation order.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::embeddings::fallback_row;
use crate::data::vocab::tokenize;
use crate::data::{EntityMention, Impression, NewsRecord};
use crate::enrich::wikidata::WikidataHit;
use crate::hash::fnv1a64_pair;

pub const TOPICS: [&str; 5] = ["sports", "finance", "music", "movies", "tech"];

const TOPIC_WORDS: [[&str; 12]; 5] = [
    [
        "match", "season", "coach", "playoff", "record", "league", "title", "injury", "transfer",
        "stadium", "finals", "derby",
    ],
    [
        "market", "shares", "earnings", "quarter", "merger", "rates", "bonds", "profit", "deficit",
        "forecast", "audit", "dividend",
    ],
    [
        "album", "tour", "single", "chart", "concert", "lyrics", "studio", "vinyl", "festival",
        "encore", "remix", "ballad",
    ],
    [
        "premiere", "sequel", "casting", "trailer", "studio", "boxoffice", "director", "script",
        "franchise", "screening", "award", "remake",
    ],
    [
        "launch", "chip", "software", "startup", "rocket", "update", "device", "network", "battery",
        "satellite", "prototype", "cloud",
    ],
];

const FILLER_WORDS: [&str; 10] = [
    "the", "a", "on", "after", "with", "over", "new", "latest", "report", "today",
];

/// (surface form, canonical QID, topic index). Surfaces are
/// capitalized runs so the offline completion client surfaces them
/// during entity exploration.
pub const ENTITY_TABLE: [(&str, &str, usize); 10] = [
    ("Tiger Woods", "Q10993", 0),
    ("Serena Williams", "Q11459", 0),
    ("Wall Street", "Q268604", 1),
    ("Federal Reserve", "Q53536", 1),
    ("Taylor Swift", "Q26876", 2),
    ("Beyonce", "Q36153", 2),
    ("Hollywood", "Q34006", 3),
    ("Netflix", "Q907311", 3),
    ("NASA", "Q23548", 4),
    ("Google", "Q95", 4),
];

/// Search entries answering every surface in [`ENTITY_TABLE`], plus a
/// United States entry reachable through both its full name and the
/// "U.S." alias so alias convergence can be exercised.
pub fn wikidata_entries() -> HashMap<String, Vec<WikidataHit>> {
    let mut entries = HashMap::new();
    for (surface, qid, _) in ENTITY_TABLE {
        entries.insert(
            surface.to_string(),
            vec![WikidataHit {
                qid: qid.to_string(),
                label: surface.to_string(),
                aliases: vec![],
            }],
        );
    }
    let us = vec![WikidataHit {
        qid: "Q30".to_string(),
        label: "United States".to_string(),
        aliases: vec!["U.S.".to_string(), "USA".to_string(), "America".to_string()],
    }];
    entries.insert("United States".to_string(), us.clone());
    entries.insert("U.S.".to_string(), us.clone());
    entries.insert("USA".to_string(), us);
    entries
}

pub fn write_wikidata_fixture(path: &Path) -> std::io::Result<()> {
    let json = serde_json::to_string_pretty(&wikidata_entries()).expect("hits always serialize");
    std::fs::write(path, json)
}

fn article_rng(seed: u64, news_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(fnv1a64_pair(seed, news_id))
}

/// `n` articles cycling through the topics. Roughly 70% carry one
/// known entity, named in the title with its surface form; the rest
/// have no entity mentions at all.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<NewsRecord> {
    (0..n)
        .map(|i| {
            let news_id = format!("N{}", i + 1);
            let mut rng = article_rng(seed, &news_id);
            let topic = i % TOPICS.len();
            let words = TOPIC_WORDS[topic];

            let mut pick = |pool: &[&str]| pool[rng.gen_range(0..pool.len())].to_string();
            let mut title_words = vec![
                pick(&words),
                pick(&FILLER_WORDS),
                pick(&words),
                pick(&words),
                pick(&FILLER_WORDS),
            ];
            let mut title_entities = Vec::new();
            if rng.gen_bool(0.7) {
                let topic_entities: Vec<_> =
                    ENTITY_TABLE.iter().filter(|(_, _, t)| *t == topic).collect();
                let (surface, qid, _) = topic_entities[rng.gen_range(0..topic_entities.len())];
                title_words.insert(0, surface.to_string());
                title_entities.push(EntityMention {
                    name: surface.to_string(),
                    wikidata_id: qid.to_string(),
                    confidence: 0.9,
                });
            }
            NewsRecord {
                news_id,
                category: TOPICS[topic].to_string(),
                subcategory: format!("{}-desk{}", TOPICS[topic], i % 2),
                title: title_words.join(" "),
                abstract_text: format!("{} coverage, item {}.", TOPICS[topic], i + 1),
                title_entities,
            }
        })
        .collect()
}

/// `n` impressions over the corpus. Each user sticks to one preferred
/// topic: history and the clicked candidate come from it, negatives
/// from the others, so the log carries a learnable preference signal.
/// Roughly every tenth impression belongs to a cold user with no
/// history.
pub fn synthetic_behaviors(corpus: &[NewsRecord], n: usize, seed: u64) -> Vec<Impression> {
    assert!(
        corpus.len() >= 2 * TOPICS.len(),
        "corpus too small to draw candidates from every topic"
    );
    let mut by_topic: Vec<Vec<&str>> = vec![Vec::new(); TOPICS.len()];
    for record in corpus {
        let topic = TOPICS
            .iter()
            .position(|t| *t == record.category)
            .expect("synthetic corpus categories come from TOPICS");
        by_topic[topic].push(&record.news_id);
    }

    let n_users = (n / 3).max(1);
    (0..n)
        .map(|i| {
            let impression_id = format!("{}", i + 1);
            let mut rng = article_rng(seed.wrapping_add(1), &impression_id);
            let user = i % n_users;
            let topic = user % TOPICS.len();
            let pool = &by_topic[topic];

            let history: Vec<String> = if i % 10 == 9 {
                Vec::new()
            } else {
                let hi = 8.min(pool.len());
                let len = rng.gen_range(3.min(hi)..=hi);
                (0..len).map(|_| pool[rng.gen_range(0..pool.len())].to_string()).collect()
            };

            let mut candidates = vec![(pool[rng.gen_range(0..pool.len())].to_string(), 1u8)];
            let n_neg = rng.gen_range(3..=5);
            for _ in 0..n_neg {
                let other = (topic + rng.gen_range(1..TOPICS.len())) % TOPICS.len();
                let neg_pool = &by_topic[other];
                candidates.push((neg_pool[rng.gen_range(0..neg_pool.len())].to_string(), 0u8));
            }
            candidates.shuffle(&mut rng);

            Impression {
                impression_id,
                user_id: format!("U{}", user + 1),
                timestamp: format!("11/{}/2019 {}:{:02}:00 AM", 10 + i % 5, 6 + i % 6, i % 60),
                history,
                candidates,
            }
        })
        .collect()
}

const POOL_REGULAR_WORDS: usize = 249;
const POOL_ARTICLES: usize = 63;
const SEPARABLE_HISTORY: usize = 4;
const SEPARABLE_NEGATIVES: usize = 4;

fn pool_word(pool: usize, k: usize) -> String {
    format!("{}{k:03}", ["apool", "bpool"][pool])
}

fn pool_anchor(pool: usize) -> &'static str {
    ["aanchor", "banchor"][pool]
}

/// A perfectly separable two-group dataset: two disjoint 250-word
/// pools (one anchor word present in every title of its pool plus 249
/// regular words, each guaranteed to occur), 63 articles per pool,
/// and impressions whose history and positive come from the user's
/// pool while every negative comes from the other. Total vocabulary
/// is 500 words. A model that overfits it must score same-pool
/// articles above cross-pool ones.
pub fn separable_dataset(n_impressions: usize, seed: u64) -> (Vec<NewsRecord>, Vec<Impression>) {
    let mut corpus = Vec::with_capacity(2 * POOL_ARTICLES);
    for pool in 0..2 {
        for j in 0..POOL_ARTICLES {
            // round-robin so all regular words appear somewhere
            let words: Vec<String> = (0..4).map(|s| pool_word(pool, (4 * j + s) % POOL_REGULAR_WORDS)).collect();
            corpus.push(NewsRecord {
                news_id: format!("S{}{j:02}", ["A", "B"][pool]),
                category: ["groupa", "groupb"][pool].to_string(),
                subcategory: "general".to_string(),
                title: format!("{} {}", pool_anchor(pool), words.join(" ")),
                abstract_text: String::new(),
                title_entities: vec![],
            });
        }
    }

    let impressions = (0..n_impressions)
        .map(|i| {
            let impression_id = format!("S{}", i + 1);
            let mut rng = article_rng(seed, &impression_id);
            let pool = i % 2;
            let own = |rng: &mut ChaCha8Rng| pool * POOL_ARTICLES + rng.gen_range(0..POOL_ARTICLES);
            let other = |rng: &mut ChaCha8Rng| (1 - pool) * POOL_ARTICLES + rng.gen_range(0..POOL_ARTICLES);

            let history: Vec<String> =
                (0..SEPARABLE_HISTORY).map(|_| corpus[own(&mut rng)].news_id.clone()).collect();
            let mut candidates = vec![(corpus[own(&mut rng)].news_id.clone(), 1u8)];
            for _ in 0..SEPARABLE_NEGATIVES {
                candidates.push((corpus[other(&mut rng)].news_id.clone(), 0u8));
            }
            candidates.shuffle(&mut rng);

            Impression {
                impression_id,
                user_id: format!("SU{}", i + 1),
                timestamp: "0".to_string(),
                history,
                candidates,
            }
        })
        .collect();
    (corpus, impressions)
}

/// Sorted unique title tokens of a corpus, for building vector files
/// that cover it.
pub fn corpus_words(corpus: &[NewsRecord]) -> Vec<String> {
    let mut words: Vec<String> = corpus.iter().flat_map(|n| tokenize(&n.title)).collect();
    words.sort();
    words.dedup();
    words
}

/// Sorted unique entity QIDs of a corpus.
pub fn corpus_qids(corpus: &[NewsRecord]) -> Vec<String> {
    let mut qids: Vec<String> = corpus
        .iter()
        .flat_map(|n| n.title_entities.iter().map(|e| e.wikidata_id.clone()))
        .filter(|q| !q.is_empty())
        .collect();
    qids.sort();
    qids.dedup();
    qids
}

fn format_row(values: &[f32], sep: char) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(&sep.to_string())
}

/// Writes a space-separated word-vector file ("token v1 ... vd") with
/// seeded per-token rows.
pub fn write_word_vector_file<S: AsRef<str>>(
    path: &Path,
    tokens: &[S],
    dim: usize,
    seed: u64,
) -> std::io::Result<()> {
    let mut out = String::new();
    for t in tokens {
        let row = fallback_row(seed, t.as_ref(), dim);
        out.push_str(&format!("{} {}\n", t.as_ref(), format_row(&row, ' ')));
    }
    std::fs::write(path, out)
}

/// Writes a tab-separated entity-vector file ("QID\tv1\t...\tvd") with
/// seeded per-QID rows.
pub fn write_entity_vector_file<S: AsRef<str>>(
    path: &Path,
    qids: &[S],
    dim: usize,
    seed: u64,
) -> std::io::Result<()> {
    let mut out = String::new();
    for q in qids {
        let row = fallback_row(seed, q.as_ref(), dim);
        out.push_str(&format!("{}\t{}\n", q.as_ref(), format_row(&row, '\t')));
    }
    std::fs::write(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::corpus_map;
    use crate::data::embeddings::load_word_embeddings;
    use crate::data::vocab::Vocab;
    use crate::enrich::wikidata::{FixtureWikidata, WikidataClient};
    use tempfile::tempdir;

    #[test]
    fn corpus_and_behaviors_are_seed_deterministic() {
        let a = synthetic_corpus(50, 7);
        let b = synthetic_corpus(50, 7);
        assert_eq!(a, b);
        assert_ne!(a, synthetic_corpus(50, 8));
        let ba = synthetic_behaviors(&a, 100, 7);
        let bb = synthetic_behaviors(&a, 100, 7);
        assert_eq!(ba, bb);
    }

    #[test]
    fn behaviors_reference_real_articles_with_both_labels() {
        let corpus = synthetic_corpus(60, 3);
        let behaviors = synthetic_behaviors(&corpus, 120, 3);
        assert_eq!(behaviors.len(), 120);
        let map = corpus_map(&corpus);
        let mut saw_cold = false;
        for imp in &behaviors {
            for id in &imp.history {
                assert!(map.contains_key(id.as_str()), "unknown history id {id}");
            }
            let pos = imp.candidates.iter().filter(|(_, l)| *l == 1).count();
            let neg = imp.candidates.iter().filter(|(_, l)| *l == 0).count();
            assert_eq!(pos, 1);
            assert!(neg >= 3);
            for (id, _) in &imp.candidates {
                assert!(map.contains_key(id.as_str()), "unknown candidate id {id}");
            }
            saw_cold |= imp.history.is_empty();
        }
        assert!(saw_cold, "expected at least one cold user");
    }

    #[test]
    fn positive_candidates_match_the_user_topic() {
        let corpus = synthetic_corpus(60, 3);
        let behaviors = synthetic_behaviors(&corpus, 60, 3);
        let map = corpus_map(&corpus);
        for imp in &behaviors {
            if imp.history.is_empty() {
                continue;
            }
            let topic = &map[imp.history[0].as_str()].category;
            for id in &imp.history {
                assert_eq!(&map[id.as_str()].category, topic);
            }
            for (id, label) in &imp.candidates {
                if *label == 1 {
                    assert_eq!(&map[id.as_str()].category, topic);
                } else {
                    assert_ne!(&map[id.as_str()].category, topic);
                }
            }
        }
    }

    #[test]
    fn entity_surfaces_resolve_through_the_fixture() {
        let fx = FixtureWikidata::from_entries(wikidata_entries());
        for (surface, qid, _) in ENTITY_TABLE {
            let hits = fx.search(surface).unwrap();
            assert_eq!(hits[0].qid, qid, "surface {surface}");
            assert_eq!(hits[0].label, surface);
        }
        assert_eq!(fx.search("U.S.").unwrap()[0].qid, "Q30");
        assert_eq!(fx.search("united states").unwrap()[0].qid, "Q30");
    }

    #[test]
    fn separable_dataset_shape_and_purity() {
        let (corpus, impressions) = separable_dataset(200, 11);
        assert_eq!(corpus.len(), 126);
        assert_eq!(impressions.len(), 200);
        let vocab = Vocab::build(
            corpus.iter().flat_map(|n| tokenize(&n.title)).collect::<Vec<_>>().iter().map(|s| s.as_str()),
            1,
        );
        // 500 distinct words plus the two reserved slots
        assert_eq!(vocab.len(), 502);

        let map = corpus_map(&corpus);
        for imp in &impressions {
            let pool = &map[imp.candidates.iter().find(|(_, l)| *l == 1).unwrap().0.as_str()].category;
            for id in &imp.history {
                assert_eq!(&map[id.as_str()].category, pool);
            }
            for (id, label) in &imp.candidates {
                if *label == 0 {
                    assert_ne!(&map[id.as_str()].category, pool);
                }
            }
            assert_eq!(imp.candidates.len(), 1 + SEPARABLE_NEGATIVES);
        }
    }

    #[test]
    fn vector_files_round_trip_exactly() {
        let dir = tempdir().unwrap();
        let corpus = synthetic_corpus(20, 5);
        let words = corpus_words(&corpus);
        let path = dir.path().join("words.vec");
        write_word_vector_file(&path, &words, 6, 5).unwrap();

        let vocab = Vocab::build(words.iter().map(|s| s.as_str()), 1);
        let (table, stats) = load_word_embeddings(&path, &vocab, 99).unwrap();
        assert_eq!(stats.missing, 0);
        assert_eq!(stats.dim, 6);
        for w in &words {
            assert_eq!(table.row(vocab.id(w) as usize), &fallback_row(5, w, 6)[..]);
        }
    }

    #[test]
    fn entity_vector_file_is_tab_separated() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ent.vec");
        write_entity_vector_file(&path, &["Q30", "Q95"], 4, 1).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        for line in content.lines() {
            assert_eq!(line.matches('\t').count(), 4);
        }
    }
}
