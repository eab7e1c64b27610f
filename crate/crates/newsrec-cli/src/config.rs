//! Run configuration: one flat key space shared by `key = value`
//! config files and `--key value` command-line overrides. Unknown
//! keys are rejected by name, and a resolved configuration can be
//! written back out as a snapshot that reparses to the same value.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use newsrec::data::sampling::{EntitySource, IndexerConfig};
use newsrec::enrich::{EnrichOptions, PromptingMode};
use newsrec::model::ModelConfig;
use newsrec::train::TrainConfig;

/// Default endpoint for live knowledge-base lookups.
pub const DEFAULT_WIKIDATA_ENDPOINT: &str = "https://www.wikidata.org/w/api.php";

/// Which language-model client enrichment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlmProvider {
    Mock,
    Http,
}

impl FromStr for LlmProvider {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(Self::Mock),
            "http" => Ok(Self::Http),
            other => Err(format!("llm_provider must be mock or http, got {other:?}")),
        }
    }
}

impl std::fmt::Display for LlmProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mock => "mock",
            Self::Http => "http",
        })
    }
}

/// Which knowledge-base client entity verification uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WikidataProvider {
    Fixture,
    Live,
}

impl FromStr for WikidataProvider {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixture" => Ok(Self::Fixture),
            "live" => Ok(Self::Live),
            other => Err(format!("wikidata_provider must be fixture or live, got {other:?}")),
        }
    }
}

impl std::fmt::Display for WikidataProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fixture => "fixture",
            Self::Live => "live",
        })
    }
}

/// Scoring function for evaluate and predict. `Model` runs the
/// trained network; the other two read labels and exist to sanity
/// check the metric plumbing from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DebugScorer {
    Model,
    Oracle,
    Antioracle,
}

impl FromStr for DebugScorer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model" => Ok(Self::Model),
            "oracle" => Ok(Self::Oracle),
            "antioracle" => Ok(Self::Antioracle),
            other => Err(format!(
                "debug_scorer must be model, oracle or antioracle, got {other:?}"
            )),
        }
    }
}

impl std::fmt::Display for DebugScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Model => "model",
            Self::Oracle => "oracle",
            Self::Antioracle => "antioracle",
        })
    }
}

/// Configuration parsing and validation failures.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {message}")]
    Unreadable { path: String, message: String },
    #[error("{origin}:{line}: expected `key = value`, got {text:?}")]
    BadLine {
        origin: String,
        line: usize,
        text: String,
    },
    #[error("unknown config key {key:?}")]
    UnknownKey { key: String },
    #[error("config key {key:?}: expected {expected}, got {value:?}")]
    BadValue {
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("missing required config key {key:?}")]
    MissingKey { key: &'static str },
    #[error("{message}")]
    Invalid { message: String },
}

/// The full key space for every command. Paths that commands can
/// derive (checkpoint file, enriched output, cache) stay optional and
/// default to locations under `run_dir`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // input paths
    pub news_path: Option<PathBuf>,
    pub behaviors_path: Option<PathBuf>,
    pub dev_behaviors_path: Option<PathBuf>,
    pub word_vectors_path: Option<PathBuf>,
    pub entity_vectors_path: Option<PathBuf>,
    pub enriched_path: Option<PathBuf>,
    pub cache_path: Option<PathBuf>,
    pub wikidata_fixture_path: Option<PathBuf>,
    // artifact locations
    pub run_dir: PathBuf,
    pub checkpoint_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    // clients
    pub llm_provider: LlmProvider,
    pub llm_endpoint: Option<String>,
    pub llm_requests_per_minute: u32,
    pub llm_max_retries: u32,
    pub llm_max_tokens: usize,
    pub llm_temperature: f32,
    pub wikidata_provider: WikidataProvider,
    pub wikidata_endpoint: String,
    // enrichment
    pub prompting_mode: PromptingMode,
    pub entity_source: EntitySource,
    // model dimensions
    pub word_dim: usize,
    pub entity_dim: usize,
    pub category_dim: usize,
    pub news_dim: usize,
    pub conv_window: usize,
    pub attention_dim: usize,
    pub self_attention_heads: usize,
    pub use_subcategory: bool,
    // training
    pub learning_rate: f32,
    pub k_negatives: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub patience: usize,
    pub word_dropout: f32,
    pub max_title_tokens: usize,
    pub max_entities: usize,
    pub max_history: usize,
    pub min_word_count: usize,
    pub dev_fraction: f64,
    // evaluation and debugging
    pub debug_scorer: DebugScorer,
    pub dump_predictions: bool,
    pub sweep: bool,
    pub plot: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            news_path: None,
            behaviors_path: None,
            dev_behaviors_path: None,
            word_vectors_path: None,
            entity_vectors_path: None,
            enriched_path: None,
            cache_path: None,
            wikidata_fixture_path: None,
            run_dir: PathBuf::from("run"),
            checkpoint_dir: None,
            checkpoint: None,
            llm_provider: LlmProvider::Mock,
            llm_endpoint: None,
            llm_requests_per_minute: 60,
            llm_max_retries: 2,
            llm_max_tokens: 128,
            llm_temperature: 0.0,
            wikidata_provider: WikidataProvider::Fixture,
            wikidata_endpoint: DEFAULT_WIKIDATA_ENDPOINT.to_string(),
            prompting_mode: PromptingMode::Hierarchical,
            entity_source: EntitySource::Enriched,
            word_dim: 300,
            entity_dim: 100,
            category_dim: 100,
            news_dim: 400,
            conv_window: 3,
            attention_dim: 200,
            self_attention_heads: 4,
            use_subcategory: false,
            learning_rate: 1e-4,
            k_negatives: 4,
            batch_size: 32,
            epochs: 10,
            seed: 42,
            patience: 3,
            word_dropout: 0.0,
            max_title_tokens: 40,
            max_entities: 10,
            max_history: 50,
            min_word_count: 1,
            dev_fraction: 0.1,
            debug_scorer: DebugScorer::Model,
            dump_predictions: false,
            sweep: false,
            plot: false,
        }
    }
}

fn parsed<T: FromStr>(key: &str, value: &str, expected: &'static str) -> Result<T, ConfigError> {
    value.parse::<T>().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        expected,
        value: value.to_string(),
    })
}

/// Splits config text into ordered `(key, value)` pairs. Blank lines
/// and `#` comments are skipped; anything else must contain `=`.
pub fn parse_config_text(text: &str, origin: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::BadLine {
                origin: origin.to_string(),
                line: i + 1,
                text: raw.to_string(),
            });
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

impl RunConfig {
    /// Sets one key. Unknown keys and unparseable values are rejected
    /// with the key named in the error.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        const FLOAT: &str = "a number";
        const COUNT: &str = "a positive integer";
        match key {
            "news_path" => self.news_path = Some(PathBuf::from(value)),
            "behaviors_path" => self.behaviors_path = Some(PathBuf::from(value)),
            "dev_behaviors_path" => self.dev_behaviors_path = Some(PathBuf::from(value)),
            "word_vectors_path" => self.word_vectors_path = Some(PathBuf::from(value)),
            "entity_vectors_path" => self.entity_vectors_path = Some(PathBuf::from(value)),
            "enriched_path" => self.enriched_path = Some(PathBuf::from(value)),
            "cache_path" => self.cache_path = Some(PathBuf::from(value)),
            "wikidata_fixture_path" => self.wikidata_fixture_path = Some(PathBuf::from(value)),
            "run_dir" => self.run_dir = PathBuf::from(value),
            "checkpoint_dir" => self.checkpoint_dir = Some(PathBuf::from(value)),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "llm_provider" => self.llm_provider = parsed(key, value, "mock or http")?,
            "llm_endpoint" => self.llm_endpoint = Some(value.to_string()),
            "llm_requests_per_minute" => self.llm_requests_per_minute = parsed(key, value, COUNT)?,
            "llm_max_retries" => self.llm_max_retries = parsed(key, value, "an integer")?,
            "llm_max_tokens" => self.llm_max_tokens = parsed(key, value, COUNT)?,
            "llm_temperature" => self.llm_temperature = parsed(key, value, FLOAT)?,
            "wikidata_provider" => self.wikidata_provider = parsed(key, value, "fixture or live")?,
            "wikidata_endpoint" => self.wikidata_endpoint = value.to_string(),
            "prompting_mode" => {
                self.prompting_mode = parsed(key, value, "direct, entity or hierarchical")?;
            }
            "entity_source" => {
                self.entity_source = parsed(key, value, "original, enriched or union")?;
            }
            "word_dim" => self.word_dim = parsed(key, value, COUNT)?,
            "entity_dim" => self.entity_dim = parsed(key, value, COUNT)?,
            "category_dim" => self.category_dim = parsed(key, value, COUNT)?,
            "news_dim" => self.news_dim = parsed(key, value, COUNT)?,
            "conv_window" => self.conv_window = parsed(key, value, COUNT)?,
            "attention_dim" => self.attention_dim = parsed(key, value, COUNT)?,
            "self_attention_heads" => self.self_attention_heads = parsed(key, value, COUNT)?,
            "use_subcategory" => self.use_subcategory = parsed(key, value, "true or false")?,
            "learning_rate" => self.learning_rate = parsed(key, value, FLOAT)?,
            "k_negatives" => self.k_negatives = parsed(key, value, COUNT)?,
            "batch_size" => self.batch_size = parsed(key, value, COUNT)?,
            "epochs" => self.epochs = parsed(key, value, COUNT)?,
            "seed" => self.seed = parsed(key, value, "an unsigned integer")?,
            "patience" => self.patience = parsed(key, value, COUNT)?,
            "word_dropout" => self.word_dropout = parsed(key, value, FLOAT)?,
            "max_title_tokens" => self.max_title_tokens = parsed(key, value, COUNT)?,
            "max_entities" => self.max_entities = parsed(key, value, COUNT)?,
            "max_history" => self.max_history = parsed(key, value, COUNT)?,
            "min_word_count" => self.min_word_count = parsed(key, value, COUNT)?,
            "dev_fraction" => self.dev_fraction = parsed(key, value, FLOAT)?,
            "debug_scorer" => {
                self.debug_scorer = parsed(key, value, "model, oracle or antioracle")?;
            }
            "dump_predictions" => self.dump_predictions = parsed(key, value, "true or false")?,
            "sweep" => self.sweep = parsed(key, value, "true or false")?,
            "plot" => self.plot = parsed(key, value, "true or false")?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Loads a config file and applies overrides on top, then runs
    /// cross-key validation.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: origin.clone(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::default();
        for (key, value) in parse_config_text(&text, &origin)? {
            cfg.apply(&key, &value)?;
        }
        for (key, value) in overrides {
            cfg.apply(key, value)?;
        }
        cfg.validate_base()?;
        Ok(cfg)
    }

    /// Checks that cross-key constraints hold. Field-level constraints
    /// that the model and trainer own are checked where those configs
    /// are assembled.
    pub fn validate_base(&self) -> Result<(), ConfigError> {
        if self.llm_provider == LlmProvider::Http && self.llm_endpoint.is_none() {
            return Err(ConfigError::Invalid {
                message: "llm_provider = http requires llm_endpoint".to_string(),
            });
        }
        if self.llm_requests_per_minute == 0 {
            return Err(ConfigError::Invalid {
                message: "llm_requests_per_minute must be at least 1".to_string(),
            });
        }
        if !self.llm_temperature.is_finite() || self.llm_temperature < 0.0 {
            return Err(ConfigError::Invalid {
                message: format!(
                    "llm_temperature must be a finite non-negative number, got {}",
                    self.llm_temperature
                ),
            });
        }
        if !(0.0..=1.0).contains(&self.dev_fraction) {
            return Err(ConfigError::Invalid {
                message: format!("dev_fraction must be within [0, 1], got {}", self.dev_fraction),
            });
        }
        Ok(())
    }

    /// Every set key as ordered `(key, value)` pairs. Applying them to
    /// a default config reproduces this one.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out: Vec<(&'static str, String)> = Vec::new();
        let path = |k: &'static str, v: &Option<PathBuf>, out: &mut Vec<(&'static str, String)>| {
            if let Some(p) = v {
                out.push((k, p.display().to_string()));
            }
        };
        path("news_path", &self.news_path, &mut out);
        path("behaviors_path", &self.behaviors_path, &mut out);
        path("dev_behaviors_path", &self.dev_behaviors_path, &mut out);
        path("word_vectors_path", &self.word_vectors_path, &mut out);
        path("entity_vectors_path", &self.entity_vectors_path, &mut out);
        path("enriched_path", &self.enriched_path, &mut out);
        path("cache_path", &self.cache_path, &mut out);
        path("wikidata_fixture_path", &self.wikidata_fixture_path, &mut out);
        out.push(("run_dir", self.run_dir.display().to_string()));
        path("checkpoint_dir", &self.checkpoint_dir, &mut out);
        path("checkpoint", &self.checkpoint, &mut out);
        out.push(("llm_provider", self.llm_provider.to_string()));
        if let Some(e) = &self.llm_endpoint {
            out.push(("llm_endpoint", e.clone()));
        }
        out.push(("llm_requests_per_minute", self.llm_requests_per_minute.to_string()));
        out.push(("llm_max_retries", self.llm_max_retries.to_string()));
        out.push(("llm_max_tokens", self.llm_max_tokens.to_string()));
        out.push(("llm_temperature", self.llm_temperature.to_string()));
        out.push(("wikidata_provider", self.wikidata_provider.to_string()));
        out.push(("wikidata_endpoint", self.wikidata_endpoint.clone()));
        out.push(("prompting_mode", self.prompting_mode.to_string()));
        out.push(("entity_source", self.entity_source.to_string()));
        out.push(("word_dim", self.word_dim.to_string()));
        out.push(("entity_dim", self.entity_dim.to_string()));
        out.push(("category_dim", self.category_dim.to_string()));
        out.push(("news_dim", self.news_dim.to_string()));
        out.push(("conv_window", self.conv_window.to_string()));
        out.push(("attention_dim", self.attention_dim.to_string()));
        out.push(("self_attention_heads", self.self_attention_heads.to_string()));
        out.push(("use_subcategory", self.use_subcategory.to_string()));
        out.push(("learning_rate", self.learning_rate.to_string()));
        out.push(("k_negatives", self.k_negatives.to_string()));
        out.push(("batch_size", self.batch_size.to_string()));
        out.push(("epochs", self.epochs.to_string()));
        out.push(("seed", self.seed.to_string()));
        out.push(("patience", self.patience.to_string()));
        out.push(("word_dropout", self.word_dropout.to_string()));
        out.push(("max_title_tokens", self.max_title_tokens.to_string()));
        out.push(("max_entities", self.max_entities.to_string()));
        out.push(("max_history", self.max_history.to_string()));
        out.push(("min_word_count", self.min_word_count.to_string()));
        out.push(("dev_fraction", self.dev_fraction.to_string()));
        out.push(("debug_scorer", self.debug_scorer.to_string()));
        out.push(("dump_predictions", self.dump_predictions.to_string()));
        out.push(("sweep", self.sweep.to_string()));
        out.push(("plot", self.plot.to_string()));
        out
    }

    /// Serializes the resolved configuration as a config file. Any
    /// command run against the snapshot reproduces this configuration.
    pub fn snapshot(&self) -> String {
        let mut s = String::from("# resolved configuration\n");
        for (k, v) in self.pairs() {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    /// Returns a required input path or an error naming its key.
    pub fn require_path(&self, key: &'static str) -> Result<PathBuf, ConfigError> {
        let slot = match key {
            "news_path" => &self.news_path,
            "behaviors_path" => &self.behaviors_path,
            "word_vectors_path" => &self.word_vectors_path,
            "wikidata_fixture_path" => &self.wikidata_fixture_path,
            other => panic!("not an input path key: {other}"),
        };
        slot.clone().ok_or(ConfigError::MissingKey { key })
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.checkpoint_dir
            .clone()
            .unwrap_or_else(|| self.run_dir.join("checkpoints"))
    }

    pub fn checkpoint_file(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.checkpoint_dir().join("best.ckpt"))
    }

    pub fn enriched_file(&self) -> PathBuf {
        self.enriched_path
            .clone()
            .unwrap_or_else(|| self.run_dir.join("enriched.tsv"))
    }

    pub fn cache_file(&self) -> PathBuf {
        self.cache_path
            .clone()
            .unwrap_or_else(|| self.run_dir.join("enrich_cache.jsonl"))
    }

    pub fn indexer_config(&self) -> IndexerConfig {
        IndexerConfig {
            max_title_tokens: self.max_title_tokens,
            max_entities: self.max_entities,
            max_history: self.max_history,
            entity_source: self.entity_source,
        }
    }

    pub fn enrich_options(&self) -> EnrichOptions {
        EnrichOptions {
            mode: self.prompting_mode,
            max_entities: self.max_entities,
            max_title_tokens: self.max_title_tokens,
            llm_max_tokens: self.llm_max_tokens,
            llm_temperature: self.llm_temperature,
        }
    }

    pub fn model_config(
        &self,
        word_vocab: usize,
        entity_vocab: usize,
        category_vocab: usize,
        subcategory_vocab: usize,
    ) -> ModelConfig {
        ModelConfig {
            word_dim: self.word_dim,
            entity_dim: self.entity_dim,
            category_dim: self.category_dim,
            news_dim: self.news_dim,
            conv_window: self.conv_window,
            attention_dim: self.attention_dim,
            self_attention_heads: self.self_attention_heads,
            use_subcategory: self.use_subcategory,
            word_vocab,
            entity_vocab,
            category_vocab,
            subcategory_vocab,
        }
    }

    pub fn train_config(&self, model: ModelConfig) -> TrainConfig {
        TrainConfig {
            model,
            learning_rate: self.learning_rate,
            k_negatives: self.k_negatives,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            patience: self.patience,
            word_dropout: self.word_dropout,
            entity_source: self.entity_source,
            prompting_mode: self.prompting_mode,
            max_title_tokens: self.max_title_tokens,
            max_entities: self.max_entities,
            max_history: self.max_history,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply_all(pairs: &[(&'static str, String)]) -> RunConfig {
        let mut cfg = RunConfig::default();
        for (k, v) in pairs {
            cfg.apply(k, v).expect("snapshot pairs must reapply");
        }
        cfg
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply("learning_rte", "0.1").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { ref key } if key == "learning_rte"));
    }

    #[test]
    fn bad_value_names_the_key() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply("epochs", "three").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("epochs"), "{text}");
        assert!(text.contains("three"), "{text}");
    }

    #[test]
    fn parses_comments_blanks_and_values_with_equals() {
        let text = "# a comment\n\nnews_path = data/news.tsv\nllm_endpoint = http://host/v1?a=b\n";
        let pairs = parse_config_text(text, "test").unwrap();
        assert_eq!(
            pairs,
            vec![
                ("news_path".to_string(), "data/news.tsv".to_string()),
                ("llm_endpoint".to_string(), "http://host/v1?a=b".to_string()),
            ]
        );
    }

    #[test]
    fn line_without_equals_is_an_error_with_position() {
        let err = parse_config_text("seed = 1\nbogus line\n", "cfg").unwrap_err();
        assert!(matches!(err, ConfigError::BadLine { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn snapshot_reparses_to_the_same_config() {
        let mut cfg = RunConfig::default();
        for (k, v) in [
            ("news_path", "n.tsv"),
            ("behaviors_path", "b.tsv"),
            ("learning_rate", "0.05"),
            ("epochs", "7"),
            ("prompting_mode", "entity"),
            ("entity_source", "union"),
            ("debug_scorer", "oracle"),
            ("use_subcategory", "true"),
            ("dev_fraction", "0.25"),
            ("llm_provider", "http"),
            ("llm_endpoint", "http://localhost:1/v1"),
        ] {
            cfg.apply(k, v).unwrap();
        }
        let reparsed = parse_config_text(&cfg.snapshot(), "snapshot").unwrap();
        let mut rebuilt = RunConfig::default();
        for (k, v) in &reparsed {
            rebuilt.apply(k, v).unwrap();
        }
        assert_eq!(rebuilt, cfg);
    }

    #[test]
    fn pairs_reapply_to_the_same_config() {
        let cfg = RunConfig::default();
        assert_eq!(apply_all(&cfg.pairs()), cfg);
    }

    #[test]
    fn overrides_win_over_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "seed = 1\nepochs = 2\n").unwrap();
        let cfg = RunConfig::load(&path, &[("seed".to_string(), "9".to_string())]).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.epochs, 2);
    }

    #[test]
    fn http_provider_requires_endpoint() {
        let mut cfg = RunConfig::default();
        cfg.apply("llm_provider", "http").unwrap();
        let err = cfg.validate_base().unwrap_err();
        assert!(err.to_string().contains("llm_endpoint"), "{err}");
    }

    #[test]
    fn derived_paths_fall_back_under_run_dir() {
        let mut cfg = RunConfig::default();
        cfg.apply("run_dir", "out/exp1").unwrap();
        assert_eq!(cfg.checkpoint_dir(), PathBuf::from("out/exp1/checkpoints"));
        assert_eq!(cfg.checkpoint_file(), PathBuf::from("out/exp1/checkpoints/best.ckpt"));
        assert_eq!(cfg.enriched_file(), PathBuf::from("out/exp1/enriched.tsv"));
        cfg.apply("checkpoint", "elsewhere/e9.ckpt").unwrap();
        assert_eq!(cfg.checkpoint_file(), PathBuf::from("elsewhere/e9.ckpt"));
    }

    #[test]
    fn missing_required_path_names_the_key() {
        let cfg = RunConfig::default();
        let err = cfg.require_path("word_vectors_path").unwrap_err();
        assert_eq!(err.to_string(), "missing required config key \"word_vectors_path\"");
    }
}
