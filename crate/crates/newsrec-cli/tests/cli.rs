//! End-to-end command coverage over synthetic fixtures: every verb,
//! the exit-code contract, artifact layout and reproducibility.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use newsrec::data::mind::{parse_enriched_tsv, write_behaviors_tsv, write_news_tsv};
use newsrec::fixtures;
use newsrec_cli::commands::{
    cmd_enrich, cmd_evaluate, cmd_predict, cmd_preprocess, cmd_report, cmd_train,
};
use newsrec_cli::config::{DebugScorer, RunConfig};
use newsrec_cli::run::DirLock;
use serde_json::Value;
use tempfile::TempDir;

struct Workspace {
    _dir: TempDir,
    root: PathBuf,
    cfg: RunConfig,
    config_path: PathBuf,
}

/// Synthetic corpus, behavior log, embedding files, knowledge-base
/// fixture and a config file, all under one temp directory.
fn workspace(n_news: usize, n_behaviors: usize) -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let corpus = fixtures::synthetic_corpus(n_news, 7);
    let behaviors = fixtures::synthetic_behaviors(&corpus, n_behaviors, 7);
    write_news_tsv(&root.join("news.tsv"), &corpus).unwrap();
    write_behaviors_tsv(&root.join("behaviors.tsv"), &behaviors).unwrap();
    fixtures::write_word_vector_file(&root.join("glove.txt"), &fixtures::corpus_words(&corpus), 16, 3)
        .unwrap();
    fixtures::write_entity_vector_file(
        &root.join("entity.vec"),
        &fixtures::corpus_qids(&corpus),
        8,
        4,
    )
    .unwrap();
    fixtures::write_wikidata_fixture(&root.join("wikidata.json")).unwrap();

    let mut cfg = RunConfig::default();
    for (key, value) in [
        ("news_path", "news.tsv"),
        ("behaviors_path", "behaviors.tsv"),
        ("word_vectors_path", "glove.txt"),
        ("entity_vectors_path", "entity.vec"),
        ("wikidata_fixture_path", "wikidata.json"),
        ("run_dir", "run"),
    ] {
        cfg.apply(key, root.join(value).to_str().unwrap()).unwrap();
    }
    for (key, value) in [
        ("word_dim", "16"),
        ("entity_dim", "8"),
        ("category_dim", "8"),
        ("news_dim", "32"),
        ("attention_dim", "16"),
        ("self_attention_heads", "2"),
        ("epochs", "2"),
        ("batch_size", "8"),
        ("k_negatives", "4"),
        ("dev_fraction", "0.25"),
        ("seed", "11"),
    ] {
        cfg.apply(key, value).unwrap();
    }
    let config_path = root.join("run.conf");
    fs::write(&config_path, cfg.snapshot()).unwrap();
    Workspace {
        _dir: dir,
        root,
        cfg,
        config_path,
    }
}

fn reroute(cfg: &RunConfig, root: &Path, name: &str) -> RunConfig {
    let mut out = cfg.clone();
    out.apply("run_dir", root.join(name).to_str().unwrap()).unwrap();
    out
}

#[test]
fn enrich_is_deterministic_and_a_warm_rerun_makes_no_client_calls() {
    let ws = workspace(10, 0);
    let first = cmd_enrich(&ws.cfg).unwrap();
    assert_eq!(first["articles"], 10);
    assert!(first["client_calls"].as_u64().unwrap() > 0);
    let enriched_path = ws.root.join("run/enriched.tsv");
    let bytes_first = fs::read(&enriched_path).unwrap();

    let warm = cmd_enrich(&ws.cfg).unwrap();
    assert_eq!(warm["client_calls"], 0, "warm cache must satisfy every completion");
    assert_eq!(warm["stats"]["llm_calls"], 0);
    assert_eq!(warm["stats"]["wikidata_calls"], 0);
    assert_eq!(fs::read(&enriched_path).unwrap(), bytes_first);

    // a cold run in a separate run directory reproduces the same file
    let cold_cfg = reroute(&ws.cfg, &ws.root, "run2");
    cmd_enrich(&cold_cfg).unwrap();
    assert_eq!(fs::read(ws.root.join("run2/enriched.tsv")).unwrap(), bytes_first);
}

#[test]
fn enrich_direct_mode_mirrors_original_entities() {
    let ws = workspace(10, 0);
    let mut cfg = ws.cfg.clone();
    cfg.apply("prompting_mode", "direct").unwrap();
    cmd_enrich(&cfg).unwrap();
    let (records, _) = parse_enriched_tsv(&ws.root.join("run/enriched.tsv")).unwrap();
    let (corpus, _) =
        newsrec::data::mind::parse_news_tsv(&ws.root.join("news.tsv")).unwrap();
    assert_eq!(records.len(), corpus.len());
    for (news, enriched) in corpus.iter().zip(&records) {
        let original: Vec<(&str, &str)> = news
            .title_entities
            .iter()
            .filter(|e| !e.wikidata_id.is_empty())
            .map(|e| (e.name.as_str(), e.wikidata_id.as_str()))
            .collect();
        let mirrored: Vec<(&str, &str)> = enriched
            .enriched_entities
            .iter()
            .map(|e| (e.name.as_str(), e.qid.as_str()))
            .collect();
        assert_eq!(mirrored, original, "direct mode must mirror {}", news.news_id);
    }
}

#[test]
fn preprocess_reports_counts_and_coverage() {
    let ws = workspace(30, 40);
    let out = cmd_preprocess(&ws.cfg).unwrap();
    assert_eq!(out["command"], "preprocess");
    assert_eq!(out["news"]["accepted"], 30);
    assert_eq!(out["behaviors"]["accepted"], 40);
    assert!(out["examples"].as_u64().unwrap() > 0);
    assert_eq!(out["split"]["dev_impressions"], 10);
    assert!(out["word_coverage"]["coverage"].as_f64().unwrap() > 0.9);
    assert!(ws.root.join("run/preprocess_report.json").exists());
}

#[test]
fn train_writes_checkpoint_log_snapshot_and_manifest() {
    let ws = workspace(30, 40);
    let out = cmd_train(&ws.cfg).unwrap();
    assert_eq!(out["command"], "train");
    assert_eq!(out["epochs_run"], 2);

    let ckpt = ws.root.join("run/checkpoints/best.ckpt");
    assert!(ckpt.exists(), "checkpoint must exist");
    assert!(newsrec::model::checkpoint::sidecar_path(&ckpt).exists());
    let log = fs::read_to_string(ws.root.join("run/training_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2, "one record per epoch");
    for line in log.lines() {
        let rec: Value = serde_json::from_str(line).unwrap();
        assert!(rec["dev"]["auc"].as_f64().unwrap() >= 0.0);
    }

    let snapshot = ws.root.join("run/resolved_config_train.conf");
    assert_eq!(RunConfig::load(&snapshot, &[]).unwrap(), ws.cfg);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(ws.root.join("run/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest[0]["command"], "train");
    assert!(!manifest[0]["outputs"].as_array().unwrap().is_empty());
    // the lock is released once the command finishes
    assert!(!ws.root.join("run/checkpoints/.lock").exists());
}

#[test]
fn train_repeats_bitwise_under_the_same_seed() {
    let ws = workspace(30, 40);
    let a = cmd_train(&reroute(&ws.cfg, &ws.root, "run_a")).unwrap();
    let b = cmd_train(&reroute(&ws.cfg, &ws.root, "run_b")).unwrap();
    let (la, lb) = (
        a["final_train_loss"].as_f64().unwrap(),
        b["final_train_loss"].as_f64().unwrap(),
    );
    assert_eq!(la.to_bits(), lb.to_bits(), "same seed must give the same final loss");
    assert_eq!(a["best_auc"], b["best_auc"]);
}

#[test]
fn train_without_word_vectors_is_a_config_error_naming_the_key() {
    let ws = workspace(10, 12);
    let mut cfg = ws.cfg.clone();
    cfg.word_vectors_path = None;
    let err = cmd_train(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("word_vectors_path"), "{err}");
}

#[test]
fn concurrent_checkpoint_directory_use_is_refused() {
    let ws = workspace(10, 12);
    let _held = DirLock::acquire(&ws.cfg.checkpoint_dir()).unwrap();
    let err = cmd_train(&ws.cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("locked"), "{err}");
}

#[test]
fn evaluate_debug_scorers_bound_the_model_and_write_reports() {
    let ws = workspace(30, 40);
    cmd_train(&ws.cfg).unwrap();

    let mut oracle_cfg = ws.cfg.clone();
    oracle_cfg.apply("debug_scorer", "oracle").unwrap();
    let oracle = cmd_evaluate(&oracle_cfg).unwrap();
    assert_eq!(oracle["metrics"]["auc"], 1.0);
    assert_eq!(oracle["metrics"]["mrr"], 1.0);
    assert_eq!(oracle["metrics"]["ndcg10"], 1.0);

    let mut anti_cfg = ws.cfg.clone();
    anti_cfg.apply("debug_scorer", "antioracle").unwrap();
    let anti = cmd_evaluate(&anti_cfg).unwrap();
    assert_eq!(anti["metrics"]["auc"], 0.0);

    let mut model_cfg = ws.cfg.clone();
    model_cfg.apply("dump_predictions", "true").unwrap();
    let out = cmd_evaluate(&model_cfg).unwrap();
    assert_eq!(out["scorer"], "model");
    let metrics = &out["metrics"];
    for key in ["auc", "mrr", "ndcg5", "ndcg10"] {
        let v = metrics[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v), "{key} = {v}");
    }
    assert!(metrics["n_impressions"].as_u64().unwrap() > 0);
    assert!(ws.root.join("run/eval_report.json").exists());
    let preds = fs::read_to_string(ws.root.join("run/predictions.jsonl")).unwrap();
    assert_eq!(
        preds.lines().count() as u64,
        metrics["n_impressions"].as_u64().unwrap()
    );
}

#[test]
fn evaluate_twice_from_the_training_snapshot_is_bitwise_identical() {
    let ws = workspace(30, 40);
    cmd_train(&ws.cfg).unwrap();
    let snapshot = ws.root.join("run/resolved_config_train.conf");
    let cfg = RunConfig::load(&snapshot, &[]).unwrap();
    let a = cmd_evaluate(&cfg).unwrap();
    let b = cmd_evaluate(&cfg).unwrap();
    assert_eq!(a["metrics"], b["metrics"]);
}

#[test]
fn evaluate_refuses_a_checkpoint_from_different_vocabularies() {
    let ws = workspace(20, 24);
    cmd_train(&ws.cfg).unwrap();
    // grow the word vocabulary so the stored fingerprint no longer matches
    let mut corpus = fixtures::synthetic_corpus(20, 7);
    corpus[0].title.push_str(" zyzzogeton");
    write_news_tsv(&ws.root.join("news.tsv"), &corpus).unwrap();
    let err = cmd_evaluate(&ws.cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("vocabularies"), "{err}");
}

#[test]
fn evaluate_sweep_writes_one_report_and_snapshot_per_prompting_mode() {
    let ws = workspace(24, 30);
    cmd_train(&ws.cfg).unwrap();
    let mut cfg = ws.cfg.clone();
    cfg.apply("sweep", "true").unwrap();
    let out = cmd_evaluate(&cfg).unwrap();
    let sweep = out["sweep"].as_object().unwrap();
    assert_eq!(sweep.len(), 3);
    for mode in ["direct", "entity", "hierarchical"] {
        let auc = sweep[mode]["metrics"]["auc"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&auc), "{mode}: {auc}");
        assert!(ws.root.join(format!("run/eval_report_{mode}.json")).exists());
        let snap_path = ws.root.join(format!("run/resolved_config_evaluate_{mode}.conf"));
        let snap = RunConfig::load(&snap_path, &[]).unwrap();
        assert_eq!(snap.prompting_mode.to_string(), mode, "snapshots must differ by mode");
    }
}

#[test]
fn predict_ranks_descending_and_oracle_puts_the_positive_first() {
    let ws = workspace(30, 40);
    cmd_train(&ws.cfg).unwrap();
    let id = {
        let (behaviors, _) =
            newsrec::data::mind::parse_behaviors_tsv(&ws.root.join("behaviors.tsv")).unwrap();
        behaviors[0].impression_id.clone()
    };

    let out = cmd_predict(&ws.cfg, &id).unwrap();
    let ranked = out["ranked"].as_array().unwrap();
    assert!(!ranked.is_empty());
    let scores: Vec<f64> = ranked.iter().map(|r| r["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]), "must sort by score desc: {scores:?}");

    let mut oracle_cfg = ws.cfg.clone();
    oracle_cfg.debug_scorer = DebugScorer::Oracle;
    let out = cmd_predict(&oracle_cfg, &id).unwrap();
    assert_eq!(out["ranked"][0]["label"], 1, "oracle top-1 must be the positive");

    let err = cmd_predict(&ws.cfg, "NOPE999").unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("NOPE999"), "{err}");
}

#[test]
fn report_renders_csv_and_optional_plots() {
    let ws = workspace(30, 40);
    cmd_train(&ws.cfg).unwrap();
    let mut cfg = ws.cfg.clone();
    cfg.apply("plot", "true").unwrap();
    let out = cmd_report(&cfg).unwrap();
    assert_eq!(out["epochs"], 2);
    let csv = fs::read_to_string(ws.root.join("run/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("epoch,train_loss,auc"));
    for plot in ["loss_curve.svg", "metric_curves.svg"] {
        let svg = fs::read_to_string(ws.root.join("run").join(plot)).unwrap();
        assert!(svg.starts_with("<svg"), "{plot} must be an svg");
    }

    // without a training log the command is an input error
    let fresh = reroute(&ws.cfg, &ws.root, "empty_run");
    let err = cmd_report(&fresh).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

fn run_binary(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_newsrec"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn binary_speaks_json_on_stdout_and_honors_exit_codes() {
    let ws = workspace(20, 24);
    let conf = ws.config_path.to_str().unwrap();

    let (code, stdout, _) = run_binary(&["train", conf]);
    assert_eq!(code, 0);
    let parsed: Value = serde_json::from_str(&stdout).expect("stdout must be pure JSON");
    assert_eq!(parsed["command"], "train");

    let (code, stdout, _) = run_binary(&["evaluate", conf]);
    assert_eq!(code, 0);
    let parsed: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(parsed["command"], "evaluate");

    // unknown key in an override: config error, nothing on stdout
    let (code, stdout, stderr) = run_binary(&["train", conf, "--learning_rte", "0.1"]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stdout.is_empty());
    assert!(stderr.contains("learning_rte"), "{stderr}");

    // unknown impression id exits 2
    let (code, _, stderr) = run_binary(&["predict", conf, "NOPE42"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("NOPE42"), "{stderr}");

    // held lock exits 3
    let _held = DirLock::acquire(&ws.cfg.checkpoint_dir()).unwrap();
    let (code, _, stderr) = run_binary(&["train", conf]);
    assert_eq!(code, 3, "{stderr}");

    // unknown command exits 2
    let (code, _, _) = run_binary(&["frobnicate", conf]);
    assert_eq!(code, 2);
}
