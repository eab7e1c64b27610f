//! Shared input loading: corpus, click logs, enriched records,
//! vocabularies and pretrained tables, with errors that name the
//! config key responsible.

use std::path::{Path, PathBuf};

use newsrec::data::embeddings::{load_entity_embeddings, load_word_embeddings, EmbeddingStats};
use newsrec::data::mind::{
    parse_behaviors_tsv, parse_enriched_tsv, parse_news_tsv, BehaviorIngestStats,
    EnrichedIngestStats, NewsIngestStats,
};
use newsrec::data::sampling::{effective_entity_qids, effective_title};
use newsrec::data::vocab::{tokenize, Vocab};
use newsrec::data::{enriched_map, EnrichedNews, Impression, NewsRecord};
use newsrec::model::checkpoint::VocabFingerprints;
use newsrec::tensor::Tensor;

use crate::config::RunConfig;
use crate::error::CliError;

fn input_at<E: std::fmt::Display>(what: &str, key: &str, path: &Path) -> impl FnOnce(E) -> CliError {
    let path = path.display().to_string();
    let what = what.to_string();
    let key = key.to_string();
    move |e| CliError::input(format!("cannot load {what} from {path} (config key {key:?}): {e}"))
}

pub fn load_corpus(cfg: &RunConfig) -> Result<(Vec<NewsRecord>, NewsIngestStats), CliError> {
    let path = cfg.require_path("news_path")?;
    parse_news_tsv(&path).map_err(input_at("news corpus", "news_path", &path))
}

pub fn load_behaviors(cfg: &RunConfig) -> Result<(Vec<Impression>, BehaviorIngestStats), CliError> {
    let path = cfg.require_path("behaviors_path")?;
    parse_behaviors_tsv(&path).map_err(input_at("behavior log", "behaviors_path", &path))
}

/// The dev log named by `dev_behaviors_path`, if one is configured.
pub fn load_dev_behaviors(cfg: &RunConfig) -> Result<Option<Vec<Impression>>, CliError> {
    let Some(path) = &cfg.dev_behaviors_path else {
        return Ok(None);
    };
    let (impressions, _) = parse_behaviors_tsv(path)
        .map_err(input_at("dev behavior log", "dev_behaviors_path", path))?;
    Ok(Some(impressions))
}

/// Enriched records read for this run.
#[derive(Debug)]
pub struct EnrichedInput {
    pub records: Vec<EnrichedNews>,
    pub stats: Option<EnrichedIngestStats>,
    pub path: PathBuf,
}

/// Reads the enriched corpus from `enriched_path` (or its default
/// location under the run directory). A missing file is an error only
/// when the key was set explicitly; otherwise articles simply keep
/// their original titles and entities.
pub fn load_enriched(cfg: &RunConfig) -> Result<EnrichedInput, CliError> {
    let path = cfg.enriched_file();
    if !path.exists() {
        if cfg.enriched_path.is_some() {
            return Err(CliError::input(format!(
                "cannot load enriched corpus from {} (config key \"enriched_path\"): file does not exist",
                path.display()
            )));
        }
        return Ok(EnrichedInput {
            records: Vec::new(),
            stats: None,
            path,
        });
    }
    let (records, stats) =
        parse_enriched_tsv(&path).map_err(input_at("enriched corpus", "enriched_path", &path))?;
    Ok(EnrichedInput {
        records,
        stats: Some(stats),
        path,
    })
}

/// The vocabularies one run trains and evaluates against.
pub struct Vocabs {
    pub words: Vocab,
    pub entities: Vocab,
    pub categories: Vocab,
    pub subcategories: Vocab,
}

impl Vocabs {
    pub fn fingerprints(&self, use_subcategory: bool) -> VocabFingerprints {
        VocabFingerprints {
            word: self.words.fingerprint(),
            entity: self.entities.fingerprint(),
            category: self.categories.fingerprint(),
            subcategory: if use_subcategory {
                self.subcategories.fingerprint()
            } else {
                0
            },
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize, usize) {
        (
            self.words.len(),
            self.entities.len(),
            self.categories.len(),
            self.subcategories.len(),
        )
    }
}

/// Builds vocabularies over the titles and entities the model will
/// actually see: enriched forms where available, selected by the
/// configured entity source.
pub fn build_vocabs(cfg: &RunConfig, corpus: &[NewsRecord], enriched: &[EnrichedNews]) -> Vocabs {
    let emap = enriched_map(enriched);
    let mut word_tokens: Vec<String> = Vec::new();
    let mut qids: Vec<&str> = Vec::new();
    for n in corpus {
        let e = emap.get(n.news_id.as_str()).copied();
        word_tokens.extend(tokenize(effective_title(n, e)));
        qids.extend(effective_entity_qids(n, e, cfg.entity_source));
    }
    Vocabs {
        words: Vocab::build(word_tokens.iter().map(String::as_str), cfg.min_word_count),
        entities: Vocab::build(qids.iter().copied(), 1),
        categories: Vocab::build(corpus.iter().map(|n| n.category.as_str()), 1),
        subcategories: Vocab::build(corpus.iter().map(|n| n.subcategory.as_str()), 1),
    }
}

fn check_dim(
    key: &'static str,
    path: &Path,
    stats: &EmbeddingStats,
    want: usize,
) -> Result<(), CliError> {
    if stats.dim != want {
        return Err(CliError::input(format!(
            "{} holds {}-dimensional vectors but config key {key:?} implies {want} (see word_dim/entity_dim)",
            path.display(),
            stats.dim
        )));
    }
    Ok(())
}

/// Loads the pretrained word table when configured. `required` makes
/// an unset key an error naming it.
pub fn load_word_table(
    cfg: &RunConfig,
    words: &Vocab,
    required: bool,
) -> Result<Option<(Tensor, EmbeddingStats)>, CliError> {
    let path = match &cfg.word_vectors_path {
        Some(p) => p.clone(),
        None if required => {
            cfg.require_path("word_vectors_path")?;
            unreachable!("require_path errors on an unset key")
        }
        None => return Ok(None),
    };
    let (table, stats) = load_word_embeddings(&path, words, cfg.seed)
        .map_err(input_at("word vectors", "word_vectors_path", &path))?;
    check_dim("word_vectors_path", &path, &stats, cfg.word_dim)?;
    Ok(Some((table, stats)))
}

/// Loads the pretrained entity table when configured. Always optional:
/// without a file every entity row is seeded randomly.
pub fn load_entity_table(
    cfg: &RunConfig,
    entities: &Vocab,
) -> Result<Option<(Tensor, EmbeddingStats)>, CliError> {
    let Some(path) = &cfg.entity_vectors_path else {
        return Ok(None);
    };
    let (table, stats) = load_entity_embeddings(path, entities, cfg.seed)
        .map_err(input_at("entity vectors", "entity_vectors_path", path))?;
    check_dim("entity_vectors_path", path, &stats, cfg.entity_dim)?;
    Ok(Some((table, stats)))
}

/// Splits one log into train and dev slices, the dev set being the
/// most recent `fraction` of impressions. A fraction of 0, or a log
/// too small to split, evaluates on the training log itself.
pub fn split_dev(behaviors: &[Impression], fraction: f64) -> (&[Impression], &[Impression]) {
    let n = behaviors.len();
    let n_dev = (n as f64 * fraction).round() as usize;
    if n_dev == 0 || n_dev >= n {
        return (behaviors, behaviors);
    }
    (&behaviors[..n - n_dev], &behaviors[n - n_dev..])
}
