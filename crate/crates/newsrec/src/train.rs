//! Mini-batch training: negative-sampling cross-entropy under Adam,
//! per-epoch ranking metrics on a held-out set, early stopping on
//! impression AUC, and a best-epoch checkpoint side effect.
//!
//! After [`train`] returns, the store holds the final-epoch
//! parameters; the best-epoch parameters live in the checkpoint.

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::sampling::{EntitySource, IndexerConfig, TrainingExample};
use crate::enrich::PromptingMode;
use crate::eval::{evaluate_model, EvalSet, MetricReport};
use crate::hash::fnv1a64_pair;
use crate::model::checkpoint::{save_checkpoint, CheckpointError, VocabFingerprints};
use crate::model::{self, BoundParams, ModelConfig, ModelError, WordDropout};
use crate::optim::{Adam, AdamConfig, ParameterStore};
use crate::tape::Tape;
use crate::tensor::{Tensor, TensorError};

/// Everything one run depends on; the whole struct is stored in the
/// checkpoint sidecar so a run can be reproduced from its artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub learning_rate: f32,
    pub k_negatives: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub patience: usize,
    /// Inverted-dropout rate on word embeddings; 0 disables it.
    pub word_dropout: f32,
    pub entity_source: EntitySource,
    pub prompting_mode: PromptingMode,
    pub max_title_tokens: usize,
    pub max_entities: usize,
    pub max_history: usize,
}

impl TrainConfig {
    pub fn defaults_for(model: ModelConfig) -> Self {
        Self {
            model,
            learning_rate: 1e-4,
            k_negatives: 4,
            batch_size: 32,
            epochs: 10,
            seed: 42,
            patience: 3,
            word_dropout: 0.0,
            entity_source: EntitySource::Enriched,
            prompting_mode: PromptingMode::Hierarchical,
            max_title_tokens: 40,
            max_entities: 10,
            max_history: 50,
        }
    }

    pub fn indexer_config(&self) -> IndexerConfig {
        IndexerConfig {
            max_title_tokens: self.max_title_tokens,
            max_entities: self.max_entities,
            max_history: self.max_history,
            entity_source: self.entity_source,
        }
    }

    /// A zero learning rate is allowed: it makes training an identity
    /// transformation, which is a useful harness check.
    pub fn validate(&self) -> Result<(), TrainError> {
        self.model.validate()?;
        let bad = |message: String| Err(TrainError::BadConfig { message });
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return bad(format!("learning_rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if self.k_negatives == 0 {
            return bad("k_negatives must be >= 1".into());
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("patience", self.patience),
            ("max_title_tokens", self.max_title_tokens),
            ("max_entities", self.max_entities),
            ("max_history", self.max_history),
        ] {
            if v == 0 {
                return bad(format!("{name} must be >= 1"));
            }
        }
        if !self.word_dropout.is_finite() || !(0.0..1.0).contains(&self.word_dropout) {
            return bad(format!("word_dropout must be in [0, 1), got {}", self.word_dropout));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("bad training config: {message}")]
    BadConfig { message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(
        "non-finite loss {loss} at epoch {epoch} step {step}; impressions in batch: {impression_ids:?}"
    )]
    NonFiniteLoss {
        loss: f64,
        epoch: usize,
        step: usize,
        impression_ids: Vec<String>,
    },
    #[error("no training examples")]
    NoExamples,
}

/// Where the best-epoch parameters are written.
#[derive(Debug, Clone)]
pub struct CheckpointSpec {
    pub path: PathBuf,
    pub vocabs: VocabFingerprints,
}

/// One line of the per-epoch metrics log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev: MetricReport,
    pub improved: bool,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOutcome {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_auc: f64,
    pub stopped_early: bool,
    pub history: Vec<EpochRecord>,
}

/// One optimizer update from one batch. Returns the batch loss.
fn train_step(
    cfg: &TrainConfig,
    store: &mut ParameterStore,
    adam: &mut Adam,
    batch: &[TrainingExample],
    dropout: Option<&mut WordDropout>,
    epoch: usize,
    step: usize,
) -> Result<f64, TrainError> {
    let mut tape = Tape::new();
    let bound = BoundParams::bind(&mut tape, store, &cfg.model);
    // the tape flags the first op that overflows, so a diverged model
    // surfaces here rather than as a NaN loss value
    let diagnose = |e: TensorError| match e {
        TensorError::NonFinite { .. } => TrainError::NonFiniteLoss {
            loss: f64::NAN,
            epoch,
            step,
            impression_ids: batch.iter().map(|x| x.impression_id.clone()).collect(),
        },
        other => TrainError::Tensor(other),
    };
    let loss_id = model::batch_loss(&mut tape, &bound, &cfg.model, batch, dropout).map_err(diagnose)?;
    let loss = f64::from(tape.value(loss_id).data()[0]);
    if !loss.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            loss,
            epoch,
            step,
            impression_ids: batch.iter().map(|e| e.impression_id.clone()).collect(),
        });
    }
    let grads_by_node = tape.backward(loss_id)?;
    let grads: Vec<Tensor> = bound
        .leaf_ids()
        .iter()
        .map(|&id| grads_by_node.wrt_or_zeros(&tape, id))
        .collect();
    adam.step(store, &grads)?;
    Ok(loss)
}

/// Runs the full loop. The epoch callback fires once per finished
/// epoch, in order, for logging.
pub fn train(
    cfg: &TrainConfig,
    store: &mut ParameterStore,
    examples: &[TrainingExample],
    dev: &EvalSet,
    checkpoint: Option<&CheckpointSpec>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(TrainError::NoExamples);
    }
    if let Some(ex) = examples.iter().find(|e| e.candidates.len() != 1 + cfg.k_negatives) {
        return Err(TrainError::BadConfig {
            message: format!(
                "example {} has {} candidates, config wants {}",
                ex.impression_id,
                ex.candidates.len(),
                1 + cfg.k_negatives
            ),
        });
    }

    let mut adam = Adam::new(
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
        store,
    );
    let mut dropout = (cfg.word_dropout > 0.0)
        .then(|| WordDropout::new(cfg.word_dropout, fnv1a64_pair(cfg.seed, "word-dropout")));
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(fnv1a64_pair(cfg.seed, "epoch-shuffle"));
    let mut order: Vec<usize> = (0..examples.len()).collect();

    let mut outcome = TrainOutcome {
        best_auc: f64::NEG_INFINITY,
        ..TrainOutcome::default()
    };
    let mut epochs_since_best = 0usize;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0f64;
        for (step, batch_ids) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<TrainingExample> = batch_ids.iter().map(|&i| examples[i].clone()).collect();
            let loss = train_step(cfg, store, &mut adam, &batch, dropout.as_mut(), epoch, step)?;
            loss_sum += loss * batch.len() as f64;
        }
        let (dev_report, _) = evaluate_model(store, &cfg.model, dev)?;

        let improved = dev_report.auc > outcome.best_auc;
        if improved {
            outcome.best_auc = dev_report.auc;
            outcome.best_epoch = epoch;
            epochs_since_best = 0;
            if let Some(spec) = checkpoint {
                save_checkpoint(&spec.path, store, cfg, &spec.vocabs)?;
            }
        } else {
            epochs_since_best += 1;
        }

        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / examples.len() as f64,
            dev: dev_report,
            improved,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        outcome.history.push(record);
        outcome.epochs_run = epoch;
        if epochs_since_best >= cfg.patience {
            outcome.stopped_early = true;
            break;
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sampling::{make_training_examples, NewsIndexer};
    use crate::data::vocab::{tokenize, Vocab};
    use crate::data::{corpus_map, Impression, NewsRecord};
    use crate::eval::build_eval_set;
    use crate::fixtures::separable_dataset;
    use crate::model::checkpoint::load_checkpoint;
    use crate::model::{init_params, restore_params};

    struct Setup {
        cfg: TrainConfig,
        store: ParameterStore,
        examples: Vec<TrainingExample>,
        dev: EvalSet,
        fingerprints: VocabFingerprints,
    }

    fn build_setup(corpus: &[NewsRecord], impressions: &[Impression], init_seed: u64) -> Setup {
        let tokens: Vec<String> = corpus.iter().flat_map(|n| tokenize(&n.title)).collect();
        let words = Vocab::build(tokens.iter().map(String::as_str), 1);
        let entities = Vocab::build(
            corpus
                .iter()
                .flat_map(|n| n.title_entities.iter().map(|e| e.wikidata_id.as_str())),
            1,
        );
        let categories = Vocab::build(corpus.iter().map(|n| n.category.as_str()), 1);

        let mut model = ModelConfig::defaults_for_vocabs(words.len(), entities.len(), categories.len(), 0);
        model.word_dim = 16;
        model.entity_dim = 4;
        model.category_dim = 8;
        model.news_dim = 16;
        model.attention_dim = 8;
        model.self_attention_heads = 2;

        let mut cfg = TrainConfig::defaults_for(model);
        cfg.batch_size = 8;
        cfg.epochs = 2;

        let map = corpus_map(corpus);
        let indexer = NewsIndexer::new(&words, &entities, &categories, &[], cfg.indexer_config());
        let (examples, stats) = make_training_examples(impressions, &map, &indexer, cfg.k_negatives, cfg.seed);
        assert!(stats.examples > 0);
        let (dev, _) = build_eval_set(impressions, &map, &indexer);

        let store = init_params(&cfg.model, None, None, init_seed).unwrap();
        let fingerprints = VocabFingerprints {
            word: words.fingerprint(),
            entity: entities.fingerprint(),
            category: categories.fingerprint(),
            subcategory: 0,
        };
        Setup {
            cfg,
            store,
            examples,
            dev,
            fingerprints,
        }
    }

    fn small_setup() -> Setup {
        let (corpus, impressions) = separable_dataset(40, 5);
        build_setup(&corpus, &impressions, 1234)
    }

    fn snapshot(store: &ParameterStore) -> Vec<(String, Vec<u32>)> {
        store
            .iter()
            .map(|p| (p.name.clone(), p.value.data().iter().map(|v| v.to_bits()).collect()))
            .collect()
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut s = small_setup();
        s.cfg.learning_rate = 0.0;
        s.cfg.epochs = 1;
        let before = snapshot(&s.store);
        train(&s.cfg, &mut s.store, &s.examples, &s.dev, None, |_| {}).unwrap();
        assert_eq!(snapshot(&s.store), before);
    }

    #[test]
    fn training_is_seed_deterministic() {
        let mut a = small_setup();
        let mut b = small_setup();
        let ra = train(&a.cfg, &mut a.store, &a.examples, &a.dev, None, |_| {}).unwrap();
        let rb = train(&b.cfg, &mut b.store, &b.examples, &b.dev, None, |_| {}).unwrap();
        assert_eq!(snapshot(&a.store), snapshot(&b.store));
        assert_eq!(ra.best_auc.to_bits(), rb.best_auc.to_bits());

        let mut c = small_setup();
        c.cfg.seed = 777;
        train(&c.cfg, &mut c.store, &c.examples, &c.dev, None, |_| {}).unwrap();
        assert_ne!(snapshot(&a.store), snapshot(&c.store));
    }

    #[test]
    fn rejects_wrong_candidate_count() {
        let mut s = small_setup();
        s.cfg.k_negatives = 3;
        let err = train(&s.cfg, &mut s.store, &s.examples, &s.dev, None, |_| {}).unwrap_err();
        assert!(matches!(err, TrainError::BadConfig { .. }), "{err}");
    }

    #[test]
    fn aborts_on_non_finite_loss_with_diagnostics() {
        let mut s = small_setup();
        // finite but huge: scores overflow f32 during the forward pass
        for v in s.store.get_mut("word_emb").value.data_mut().iter_mut().skip(32) {
            *v = 1e20;
        }
        let err = train(&s.cfg, &mut s.store, &s.examples, &s.dev, None, |_| {}).unwrap_err();
        match err {
            TrainError::NonFiniteLoss {
                loss,
                epoch,
                impression_ids,
                ..
            } => {
                assert!(!loss.is_finite());
                assert_eq!(epoch, 1);
                assert!(!impression_ids.is_empty());
            }
            other => panic!("expected NonFiniteLoss, got {other}"),
        }
    }

    #[test]
    fn early_stopping_after_patience_without_improvement() {
        let mut s = small_setup();
        // frozen parameters make every epoch tie the first
        s.cfg.learning_rate = 0.0;
        s.cfg.epochs = 10;
        s.cfg.patience = 2;
        let outcome = train(&s.cfg, &mut s.store, &s.examples, &s.dev, None, |_| {}).unwrap();
        assert!(outcome.stopped_early);
        assert_eq!(outcome.epochs_run, 3);
        assert_eq!(outcome.best_epoch, 1);
        assert!(outcome.history[0].improved);
        assert!(!outcome.history[1].improved);
    }

    #[test]
    fn epoch_records_are_emitted_in_order() {
        let mut s = small_setup();
        s.cfg.epochs = 3;
        s.cfg.patience = 10;
        let mut seen = Vec::new();
        let outcome = train(&s.cfg, &mut s.store, &s.examples, &s.dev, None, |r| {
            seen.push(r.epoch);
            assert!(r.train_loss.is_finite());
            assert!(r.wall_seconds >= 0.0);
        })
        .unwrap();
        assert_eq!(seen, vec![1, 2, 3]);
        assert_eq!(outcome.history.len(), 3);
        let json = serde_json::to_string(&outcome.history[0]).unwrap();
        assert!(json.contains("\"train_loss\""));
    }

    #[test]
    fn best_checkpoint_reloads_to_best_auc() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = small_setup();
        s.cfg.epochs = 3;
        s.cfg.patience = 10;
        s.cfg.learning_rate = 0.05;
        let spec = CheckpointSpec {
            path: dir.path().join("best.ckpt"),
            vocabs: s.fingerprints,
        };
        let outcome = train(&s.cfg, &mut s.store, &s.examples, &s.dev, Some(&spec), |_| {}).unwrap();
        assert!(outcome.best_epoch >= 1);

        let loaded = load_checkpoint::<TrainConfig>(&spec.path, Some(&s.fingerprints)).unwrap();
        assert_eq!(loaded.config, s.cfg);
        let restored = restore_params(&loaded.config.model, &loaded.tensors).unwrap();
        let (report, _) = evaluate_model(&restored, &loaded.config.model, &s.dev).unwrap();
        assert_eq!(report.auc.to_bits(), outcome.best_auc.to_bits());
    }

    #[test]
    fn word_dropout_changes_the_trajectory_but_stays_deterministic() {
        let mut a = small_setup();
        a.cfg.word_dropout = 0.2;
        a.cfg.epochs = 1;
        let mut b = small_setup();
        b.cfg.word_dropout = 0.2;
        b.cfg.epochs = 1;
        let mut clean = small_setup();
        clean.cfg.epochs = 1;

        train(&a.cfg, &mut a.store, &a.examples, &a.dev, None, |_| {}).unwrap();
        train(&b.cfg, &mut b.store, &b.examples, &b.dev, None, |_| {}).unwrap();
        train(&clean.cfg, &mut clean.store, &clean.examples, &clean.dev, None, |_| {}).unwrap();
        assert_eq!(snapshot(&a.store), snapshot(&b.store));
        assert_ne!(snapshot(&a.store), snapshot(&clean.store));
    }

    #[test]
    fn overfits_the_separable_dataset() {
        let (corpus, impressions) = separable_dataset(200, 11);
        let mut s = build_setup(&corpus, &impressions, 2024);
        s.cfg.model.word_dim = 32;
        s.cfg.model.news_dim = 32;
        s.cfg.model.category_dim = 16;
        s.cfg.model.attention_dim = 16;
        s.cfg.learning_rate = 1e-4;
        s.cfg.k_negatives = 4;
        s.cfg.batch_size = 4;
        s.cfg.epochs = 20;
        s.cfg.patience = 20;
        let mut store = init_params(&s.cfg.model, None, None, 2024).unwrap();
        let outcome = train(&s.cfg, &mut store, &s.examples, &s.dev, None, |r| {
            log::info!("epoch {}: loss {:.4} auc {:.4}", r.epoch, r.train_loss, r.dev.auc);
        })
        .unwrap();
        assert!(
            outcome.best_auc >= 0.95,
            "expected training AUC >= 0.95 within {} epochs, best was {:.4} at epoch {}",
            s.cfg.epochs,
            outcome.best_auc,
            outcome.best_epoch
        );
        assert!(
            outcome.history[0].train_loss > outcome.history[1].train_loss
                && outcome.history[1].train_loss > outcome.history[2].train_loss,
            "loss should fall over the first three epochs: {:?}",
            outcome.history[..3].iter().map(|r| r.train_loss).collect::<Vec<_>>()
        );
    }
}
