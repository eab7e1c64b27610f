//! Command implementations. Each returns the JSON value the binary
//! prints to stdout; artifacts land in the run directory, human logs
//! on stderr.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use newsrec::data::mind::{write_enriched_tsv, BehaviorIngestStats, NewsIngestStats};
use newsrec::data::sampling::{make_training_examples, NewsIndexer};
use newsrec::data::{corpus_map, EnrichedNews, Impression, NewsRecord};
use newsrec::enrich::{
    enrich_corpus, EnrichOptions, EnrichmentCache, FixtureWikidata, HttpLlm, LiveWikidata,
    LlmClient, MockLlm, PromptingMode, WikidataClient,
};
use newsrec::eval::{
    antioracle_scores, build_eval_set, evaluate_with, oracle_scores, ranking, EvalSet,
    MetricReport, ModelScorer, PredictionRow,
};
use newsrec::model::checkpoint::{load_checkpoint, sidecar_path, LoadedCheckpoint};
use newsrec::model::{init_params, restore_params};
use newsrec::optim::ParameterStore;
use newsrec::train::{train, CheckpointSpec, EpochRecord, TrainConfig, TrainError};
use serde_json::{json, Value};

use crate::config::{DebugScorer, LlmProvider, RunConfig, WikidataProvider};
use crate::error::CliError;
use crate::load::{
    build_vocabs, load_behaviors, load_corpus, load_dev_behaviors, load_enriched,
    load_entity_table, load_word_table, split_dev, EnrichedInput, Vocabs,
};
use crate::report;
use crate::run::{DirLock, ManifestEntry, RunDir};

fn runtime_at(what: &str, path: &Path) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.display().to_string();
    let what = what.to_string();
    move |e| CliError::runtime(format!("cannot write {what} {path}: {e}"))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    fs::write(path, text).map_err(runtime_at("report", path))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Everything train, evaluate, predict and preprocess share.
struct Prepared {
    corpus: Vec<NewsRecord>,
    news_stats: NewsIngestStats,
    behaviors: Vec<Impression>,
    behavior_stats: BehaviorIngestStats,
    enriched: EnrichedInput,
    vocabs: Vocabs,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let (corpus, news_stats) = load_corpus(cfg)?;
    let (behaviors, behavior_stats) = load_behaviors(cfg)?;
    let enriched = load_enriched(cfg)?;
    let vocabs = build_vocabs(cfg, &corpus, &enriched.records);
    Ok(Prepared {
        corpus,
        news_stats,
        behaviors,
        behavior_stats,
        enriched,
        vocabs,
    })
}

fn indexer<'a>(vocabs: &'a Vocabs, enriched: &'a [EnrichedNews], idx: newsrec::data::sampling::IndexerConfig) -> NewsIndexer<'a> {
    NewsIndexer::new(&vocabs.words, &vocabs.entities, &vocabs.categories, enriched, idx)
        .with_subcategories(&vocabs.subcategories)
}

fn llm_client(cfg: &RunConfig) -> Result<Box<dyn LlmClient>, CliError> {
    match cfg.llm_provider {
        LlmProvider::Mock => Ok(Box::new(MockLlm)),
        LlmProvider::Http => {
            let endpoint = cfg.llm_endpoint.as_deref().ok_or_else(|| {
                CliError::input("llm_provider = http requires llm_endpoint".to_string())
            })?;
            Ok(Box::new(HttpLlm::new(
                endpoint,
                cfg.llm_requests_per_minute,
                cfg.llm_max_retries,
            )))
        }
    }
}

fn wikidata_client(cfg: &RunConfig) -> Result<Box<dyn WikidataClient>, CliError> {
    match cfg.wikidata_provider {
        WikidataProvider::Fixture => {
            let path = cfg.require_path("wikidata_fixture_path")?;
            let client = FixtureWikidata::from_path(&path).map_err(|e| {
                CliError::input(format!(
                    "cannot load knowledge-base fixture from {} (config key \"wikidata_fixture_path\"): {e}",
                    path.display()
                ))
            })?;
            Ok(Box::new(client))
        }
        WikidataProvider::Live => Ok(Box::new(LiveWikidata::new(&cfg.wikidata_endpoint))),
    }
}

fn open_cache(cfg: &RunConfig) -> Result<(EnrichmentCache, PathBuf), CliError> {
    let path = cfg.cache_file();
    let cache = EnrichmentCache::open(&path).map_err(|e| {
        CliError::input(format!(
            "cannot open enrichment cache {} (config key \"cache_path\"): {e}",
            path.display()
        ))
    })?;
    Ok((cache, path))
}

/// Rewrites titles and verifies entities for the whole corpus,
/// writing the enriched file and appending to the completion cache.
/// Per-article failures degrade to the original text and are counted,
/// not fatal.
pub fn cmd_enrich(cfg: &RunConfig) -> Result<Value, CliError> {
    let (corpus, news_stats) = load_corpus(cfg)?;
    let llm = llm_client(cfg)?;
    let wikidata = wikidata_client(cfg)?;
    let run = RunDir::create(&cfg.run_dir)?;
    let (cache, cache_path) = open_cache(cfg)?;
    let snapshot = run.write_snapshot(cfg, "enrich")?;

    let (records, stats) = enrich_corpus(
        &corpus,
        llm.as_ref(),
        wikidata.as_ref(),
        &cache,
        cfg.enrich_options(),
    );
    let out_path = cfg.enriched_file();
    write_enriched_tsv(&out_path, &records)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", out_path.display())))?;

    log::info!(
        "enriched {} articles with {} client calls ({} llm, {} knowledge base), {} cache hits",
        stats.articles,
        stats.llm_calls + stats.wikidata_calls,
        stats.llm_calls,
        stats.wikidata_calls,
        stats.cache_hits
    );
    log::info!(
        "fallbacks: {} direct, {} refine; {} exploration failures; {} entities dropped",
        stats.direct_fallbacks,
        stats.refine_fallbacks,
        stats.explore_failures,
        stats.entities_dropped
    );

    run.record(
        ManifestEntry::new("enrich")
            .input("news_path", &cfg.require_path("news_path")?)
            .output(&out_path)
            .output(&cache_path),
        &snapshot,
    )?;
    Ok(json!({
        "command": "enrich",
        "articles": records.len(),
        "client_calls": stats.llm_calls + stats.wikidata_calls,
        "news": news_stats,
        "stats": stats,
        "enriched_path": display(&out_path),
        "cache_path": display(&cache_path),
        "snapshot": display(&snapshot),
    }))
}

fn dev_slices<'a>(
    behaviors: &'a [Impression],
    dev_file: &'a Option<Vec<Impression>>,
    fraction: f64,
) -> (&'a [Impression], &'a [Impression]) {
    match dev_file {
        Some(d) => (behaviors, d.as_slice()),
        None => split_dev(behaviors, fraction),
    }
}

/// Dry run of the data path: parse everything, build vocabularies,
/// assemble training examples and the dev set, and report the counts
/// and embedding coverage that training would see.
pub fn cmd_preprocess(cfg: &RunConfig) -> Result<Value, CliError> {
    let prep = prepare(cfg)?;
    let dev_file = load_dev_behaviors(cfg)?;
    let word_table = load_word_table(cfg, &prep.vocabs.words, false)?;
    let entity_table = load_entity_table(cfg, &prep.vocabs.entities)?;
    let run = RunDir::create(&cfg.run_dir)?;
    let snapshot = run.write_snapshot(cfg, "preprocess")?;

    let idx = indexer(&prep.vocabs, &prep.enriched.records, cfg.indexer_config());
    let cmap = corpus_map(&prep.corpus);
    let (train_bh, dev_bh) = dev_slices(&prep.behaviors, &dev_file, cfg.dev_fraction);
    let (examples, sampling) =
        make_training_examples(train_bh, &cmap, &idx, cfg.k_negatives, cfg.seed);
    let (eval_set, eval_build) = build_eval_set(dev_bh, &cmap, &idx);

    let (w, e, c, s) = prep.vocabs.sizes();
    let result = json!({
        "command": "preprocess",
        "news": prep.news_stats,
        "behaviors": prep.behavior_stats,
        "enriched": {
            "path": display(&prep.enriched.path),
            "stats": prep.enriched.stats,
            "used": !prep.enriched.records.is_empty(),
        },
        "vocab": {"words": w, "entities": e, "categories": c, "subcategories": s},
        "split": {"train_impressions": train_bh.len(), "dev_impressions": dev_bh.len()},
        "examples": examples.len(),
        "sampling": sampling,
        "dev_build": eval_build,
        "dev_eval_impressions": eval_set.impressions.len(),
        "word_coverage": word_table.as_ref().map(|t| &t.1),
        "entity_coverage": entity_table.as_ref().map(|t| &t.1),
        "snapshot": display(&snapshot),
    });
    let report_path = run.root.join("preprocess_report.json");
    write_json(&report_path, &result)?;
    run.record(
        ManifestEntry::new("preprocess").output(&report_path),
        &snapshot,
    )?;
    Ok(result)
}

fn train_err(e: TrainError) -> CliError {
    match e {
        TrainError::BadConfig { .. } | TrainError::NoExamples => CliError::input(e.to_string()),
        other => CliError::runtime(other.to_string()),
    }
}

/// Trains from scratch, checkpointing the best dev-AUC epoch and
/// logging one JSON record per epoch.
pub fn cmd_train(cfg: &RunConfig) -> Result<Value, CliError> {
    let prep = prepare(cfg)?;
    let dev_file = load_dev_behaviors(cfg)?;
    let word_table = load_word_table(cfg, &prep.vocabs.words, true)?.expect("required table");
    let entity_table = load_entity_table(cfg, &prep.vocabs.entities)?;

    let (w, e, c, s) = prep.vocabs.sizes();
    let model_cfg = cfg.model_config(w, e, c, s);
    let tc = cfg.train_config(model_cfg.clone());
    tc.validate().map_err(|err| CliError::input(err.to_string()))?;

    let run = RunDir::create(&cfg.run_dir)?;
    let ckpt_dir = cfg.checkpoint_dir();
    let _lock = DirLock::acquire(&ckpt_dir)?;
    let snapshot = run.write_snapshot(cfg, "train")?;

    let idx = indexer(&prep.vocabs, &prep.enriched.records, tc.indexer_config());
    let cmap = corpus_map(&prep.corpus);
    let (train_bh, dev_bh) = dev_slices(&prep.behaviors, &dev_file, cfg.dev_fraction);
    let (examples, sampling) =
        make_training_examples(train_bh, &cmap, &idx, cfg.k_negatives, cfg.seed);
    if examples.is_empty() {
        return Err(CliError::input(format!(
            "no usable training examples in {} impressions (skipped: {} empty history, {} without positives, {} without negatives)",
            train_bh.len(),
            sampling.skipped_empty_history,
            sampling.skipped_no_positive,
            sampling.skipped_no_negatives
        )));
    }
    let (dev_set, dev_build) = build_eval_set(dev_bh, &cmap, &idx);

    let mut store = init_params(
        &model_cfg,
        Some(&word_table.0),
        entity_table.as_ref().map(|t| &t.0),
        cfg.seed,
    )
    .map_err(|err| CliError::input(err.to_string()))?;

    let spec = CheckpointSpec {
        path: cfg.checkpoint_file(),
        vocabs: prep.vocabs.fingerprints(cfg.use_subcategory),
    };
    let log_path = run.root.join("training_log.jsonl");
    let mut log_file = BufWriter::new(File::create(&log_path).map_err(runtime_at("training log", &log_path))?);
    let mut log_io: Option<std::io::Error> = None;

    log::info!(
        "training on {} examples ({} train / {} dev impressions), vocab {}/{}/{}/{}",
        examples.len(),
        train_bh.len(),
        dev_bh.len(),
        w, e, c, s
    );
    let outcome = train(&tc, &mut store, &examples, &dev_set, Some(&spec), |rec| {
        let line = serde_json::to_string(rec).expect("epoch records serialize");
        if let Err(err) = writeln!(log_file, "{line}") {
            log_io.get_or_insert(err);
        }
        log::info!(
            "epoch {}: train loss {:.6}, dev auc {:.4}{}",
            rec.epoch,
            rec.train_loss,
            rec.dev.auc,
            if rec.improved { " (best so far)" } else { "" }
        );
    })
    .map_err(train_err)?;
    log_file.flush().map_err(runtime_at("training log", &log_path))?;
    if let Some(err) = log_io {
        return Err(runtime_at("training log", &log_path)(err));
    }

    let final_loss = outcome.history.last().map(|r| r.train_loss);
    run.record(
        ManifestEntry::new("train")
            .input("news_path", &cfg.require_path("news_path")?)
            .input("behaviors_path", &cfg.require_path("behaviors_path")?)
            .input("word_vectors_path", &cfg.require_path("word_vectors_path")?)
            .output(&spec.path)
            .output(&sidecar_path(&spec.path))
            .output(&log_path),
        &snapshot,
    )?;
    Ok(json!({
        "command": "train",
        "examples": examples.len(),
        "sampling": sampling,
        "dev_build": dev_build,
        "epochs_run": outcome.epochs_run,
        "best_epoch": outcome.best_epoch,
        "best_auc": outcome.best_auc,
        "stopped_early": outcome.stopped_early,
        "final_train_loss": final_loss,
        "word_coverage": word_table.1,
        "checkpoint": display(&spec.path),
        "log": display(&log_path),
        "snapshot": display(&snapshot),
    }))
}

/// A checkpoint rebound to parameters, plus the configuration it was
/// trained with.
struct Restored {
    config: TrainConfig,
    store: ParameterStore,
    path: PathBuf,
}

fn load_trained(cfg: &RunConfig, vocabs: &Vocabs) -> Result<Restored, CliError> {
    let path = cfg.checkpoint_file();
    let at = |e: &dyn std::fmt::Display| format!("checkpoint {}: {e}", path.display());
    let loaded: LoadedCheckpoint<TrainConfig> =
        load_checkpoint(&path, None).map_err(|e| CliError::input(at(&e)))?;
    let expected = vocabs.fingerprints(loaded.config.model.use_subcategory);
    if expected != loaded.vocabs {
        return Err(CliError::input(format!(
            "checkpoint {} was trained against different vocabularies (stored word/entity fingerprints {:016x}/{:016x}, current {:016x}/{:016x}); regenerate inputs or retrain",
            path.display(),
            loaded.vocabs.word,
            loaded.vocabs.entity,
            expected.word,
            expected.entity
        )));
    }
    let store =
        restore_params(&loaded.config.model, &loaded.tensors).map_err(|e| CliError::input(at(&e)))?;
    Ok(Restored {
        config: loaded.config,
        store,
        path,
    })
}

fn score_set(
    restored: Option<&Restored>,
    scorer: DebugScorer,
    set: &EvalSet,
) -> Result<(MetricReport, Vec<PredictionRow>), CliError> {
    match (scorer, restored) {
        (DebugScorer::Model, Some(r)) => newsrec::eval::evaluate_model(&r.store, &r.config.model, set)
            .map_err(|e| CliError::runtime(format!("evaluation failed: {e}"))),
        (DebugScorer::Model, None) => unreachable!("model scoring requires a checkpoint"),
        (DebugScorer::Oracle, _) => evaluate_with(set, |i| Ok(oracle_scores(i)))
            .map_err(|e| CliError::runtime(format!("evaluation failed: {e}"))),
        (DebugScorer::Antioracle, _) => evaluate_with(set, |i| Ok(antioracle_scores(i)))
            .map_err(|e| CliError::runtime(format!("evaluation failed: {e}"))),
    }
}

/// Scores the behavior log and reports ranking metrics, to stdout and
/// to a report file. With `sweep = true` the corpus is re-enriched
/// under each prompting mode and scored once per mode against the
/// training-time vocabularies.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Value, CliError> {
    let prep = prepare(cfg)?;
    let needs_model = cfg.debug_scorer == DebugScorer::Model;
    let (_lock, restored) = if needs_model {
        let lock = DirLock::acquire(&cfg.checkpoint_dir())?;
        let restored = load_trained(cfg, &prep.vocabs)?;
        (Some(lock), Some(restored))
    } else {
        (None, None)
    };
    let idx_cfg = restored
        .as_ref()
        .map_or_else(|| cfg.indexer_config(), |r| r.config.indexer_config());
    let run = RunDir::create(&cfg.run_dir)?;
    let cmap = corpus_map(&prep.corpus);

    if cfg.sweep {
        let llm = llm_client(cfg)?;
        let wikidata = wikidata_client(cfg)?;
        let (cache, _cache_path) = open_cache(cfg)?;
        let mut manifest = ManifestEntry::new("evaluate");
        let mut reports = serde_json::Map::new();
        let mut first_snapshot: Option<PathBuf> = None;
        for mode in [PromptingMode::Direct, PromptingMode::Entity, PromptingMode::Hierarchical] {
            let mut mode_cfg = cfg.clone();
            mode_cfg.prompting_mode = mode;
            mode_cfg.sweep = false;
            let snapshot = run.write_snapshot(&mode_cfg, &format!("evaluate_{mode}"))?;
            let opts = EnrichOptions {
                mode,
                ..cfg.enrich_options()
            };
            let (mode_enriched, enrich_stats) =
                enrich_corpus(&prep.corpus, llm.as_ref(), wikidata.as_ref(), &cache, opts);
            let mode_idx = indexer(&prep.vocabs, &mode_enriched, idx_cfg);
            let (set, build) = build_eval_set(&prep.behaviors, &cmap, &mode_idx);
            let (metrics, _) = score_set(restored.as_ref(), cfg.debug_scorer, &set)?;
            let report_path = run.root.join(format!("eval_report_{mode}.json"));
            let entry = json!({
                "prompting_mode": mode.to_string(),
                "metrics": metrics,
                "build": build,
                "enrich_stats": enrich_stats,
                "snapshot": display(&snapshot),
            });
            write_json(&report_path, &entry)?;
            manifest = manifest.output(&report_path);
            first_snapshot.get_or_insert(snapshot);
            reports.insert(mode.to_string(), entry);
            log::info!("prompting mode {mode}: report written to {}", report_path.display());
        }
        let snapshot = first_snapshot.expect("sweep covers three modes");
        run.record(manifest, &snapshot)?;
        return Ok(json!({
            "command": "evaluate",
            "scorer": cfg.debug_scorer.to_string(),
            "sweep": Value::Object(reports),
        }));
    }

    let snapshot = run.write_snapshot(cfg, "evaluate")?;
    let idx = indexer(&prep.vocabs, &prep.enriched.records, idx_cfg);
    let (set, build) = build_eval_set(&prep.behaviors, &cmap, &idx);
    let (metrics, predictions) = score_set(restored.as_ref(), cfg.debug_scorer, &set)?;

    let report_path = run.root.join("eval_report.json");
    let mut result = json!({
        "command": "evaluate",
        "scorer": cfg.debug_scorer.to_string(),
        "checkpoint": restored.as_ref().map(|r| display(&r.path)),
        "metrics": metrics,
        "build": build,
        "report": display(&report_path),
        "snapshot": display(&snapshot),
    });
    let mut manifest = ManifestEntry::new("evaluate").output(&report_path);
    if cfg.dump_predictions {
        let pred_path = run.root.join("predictions.jsonl");
        let mut out = String::new();
        for row in &predictions {
            out.push_str(&serde_json::to_string(row).expect("prediction rows serialize"));
            out.push('\n');
        }
        fs::write(&pred_path, out).map_err(runtime_at("predictions", &pred_path))?;
        manifest = manifest.output(&pred_path);
        result["predictions"] = Value::String(display(&pred_path));
    }
    write_json(&report_path, &result)?;
    run.record(manifest, &snapshot)?;
    Ok(result)
}

/// Ranks one impression's candidates, highest score first.
pub fn cmd_predict(cfg: &RunConfig, impression_id: &str) -> Result<Value, CliError> {
    let prep = prepare(cfg)?;
    let needs_model = cfg.debug_scorer == DebugScorer::Model;
    let (_lock, restored) = if needs_model {
        let lock = DirLock::acquire(&cfg.checkpoint_dir())?;
        let restored = load_trained(cfg, &prep.vocabs)?;
        (Some(lock), Some(restored))
    } else {
        (None, None)
    };
    let impression = prep
        .behaviors
        .iter()
        .find(|i| i.impression_id == impression_id)
        .ok_or_else(|| {
            CliError::input(format!(
                "unknown impression id {impression_id:?} in the behavior log"
            ))
        })?;

    let idx_cfg = restored
        .as_ref()
        .map_or_else(|| cfg.indexer_config(), |r| r.config.indexer_config());
    let idx = indexer(&prep.vocabs, &prep.enriched.records, idx_cfg);
    let cmap = corpus_map(&prep.corpus);
    let (set, _build) = build_eval_set(std::slice::from_ref(impression), &cmap, &idx);
    let Some(resolved) = set.impressions.first() else {
        return Err(CliError::input(format!(
            "impression {impression_id:?} has candidates missing from the news corpus"
        )));
    };

    let scores: Vec<f64> = match (&restored, cfg.debug_scorer) {
        (Some(r), DebugScorer::Model) => {
            let scorer = ModelScorer::new(&r.store, &r.config.model, &set)
                .map_err(|e| CliError::runtime(format!("scoring failed: {e}")))?;
            scorer
                .scores(resolved)
                .map_err(|e| CliError::runtime(format!("scoring failed: {e}")))?
        }
        (_, DebugScorer::Oracle) => oracle_scores(resolved),
        (_, DebugScorer::Antioracle) => antioracle_scores(resolved),
        (None, DebugScorer::Model) => unreachable!("model scoring requires a checkpoint"),
    };

    let order = ranking(&scores);
    let ranked: Vec<Value> = order
        .iter()
        .enumerate()
        .map(|(r, &slot)| {
            let news_id = set.news_ids[resolved.candidates[slot]].as_str();
            json!({
                "rank": r + 1,
                "news_id": news_id,
                "score": scores[slot],
                "label": resolved.labels[slot],
                "title": cmap.get(news_id).map(|n| n.title.as_str()),
            })
        })
        .collect();

    let run = RunDir::create(&cfg.run_dir)?;
    let snapshot = run.write_snapshot(cfg, "predict")?;
    let result = json!({
        "command": "predict",
        "impression_id": impression_id,
        "user_id": impression.user_id,
        "scorer": cfg.debug_scorer.to_string(),
        "checkpoint": restored.as_ref().map(|r| display(&r.path)),
        "ranked": ranked,
        "snapshot": display(&snapshot),
    });
    let safe: String = impression_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    let out_path = run.root.join(format!("prediction_{safe}.json"));
    write_json(&out_path, &result)?;
    run.record(ManifestEntry::new("predict").output(&out_path), &snapshot)?;
    Ok(result)
}

/// Renders the training log as a CSV table and optional SVG charts.
pub fn cmd_report(cfg: &RunConfig) -> Result<Value, CliError> {
    let run = RunDir::create(&cfg.run_dir)?;
    let log_path = run.root.join("training_log.jsonl");
    let text = fs::read_to_string(&log_path).map_err(|e| {
        CliError::input(format!(
            "cannot read training log {} (run train first): {e}",
            log_path.display()
        ))
    })?;
    let rows: Vec<EpochRecord> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::input(format!("malformed training log {}: {e}", log_path.display())))?;
    if rows.is_empty() {
        return Err(CliError::input(format!(
            "training log {} has no epoch records",
            log_path.display()
        )));
    }

    let snapshot = run.write_snapshot(cfg, "report")?;
    let csv_path = run.root.join("report.csv");
    fs::write(&csv_path, report::epochs_csv(&rows)).map_err(runtime_at("metric table", &csv_path))?;
    let mut manifest = ManifestEntry::new("report").input("training_log", &log_path).output(&csv_path);

    let mut plots: Vec<String> = Vec::new();
    if cfg.plot {
        let loss: Vec<(f64, f64)> = rows.iter().map(|r| (r.epoch as f64, r.train_loss)).collect();
        let auc: Vec<(f64, f64)> = rows.iter().map(|r| (r.epoch as f64, r.dev.auc)).collect();
        let ndcg: Vec<(f64, f64)> = rows.iter().map(|r| (r.epoch as f64, r.dev.ndcg10)).collect();
        for (name, title, series) in [
            ("loss_curve.svg", "training loss per epoch", vec![("train loss", loss)]),
            (
                "metric_curves.svg",
                "dev ranking metrics per epoch",
                vec![("auc", auc), ("ndcg@10", ndcg)],
            ),
        ] {
            let path = run.root.join(name);
            fs::write(&path, report::line_plot_svg(title, "epoch", &series))
                .map_err(runtime_at("plot", &path))?;
            manifest = manifest.output(&path);
            plots.push(display(&path));
        }
    }

    let eval_report = fs::read_to_string(run.root.join("eval_report.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<Value>(&t).ok());
    run.record(manifest, &snapshot)?;
    Ok(json!({
        "command": "report",
        "epochs": rows.len(),
        "best_auc": rows.iter().map(|r| r.dev.auc).fold(f64::NEG_INFINITY, f64::max),
        "csv": display(&csv_path),
        "plots": plots,
        "eval_report": eval_report,
        "snapshot": display(&snapshot),
    }))
}
