//! Impression-level ranking evaluation: AUC, MRR, nDCG@5, nDCG@10,
//! averaged over impressions.
//!
//! AUC uses the rank-sum form with average ranks for ties, which
//! equals the brute-force pairwise statistic exactly (both are sums
//! of halves, exact in f64). MRR and nDCG rank by descending score
//! with ties broken by original candidate order. Impressions with no
//! positive are skipped entirely; impressions with positives but a
//! single class are skipped for AUC only.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::sampling::{NewsIndexer, NewsIndices};
use crate::data::{Impression, NewsRecord};
use crate::model::{self, ModelConfig};
use crate::optim::ParameterStore;
use crate::par::par_map;
use crate::tensor::{dot_f64, Tensor, TensorError};

/// Means over impressions plus the counts needed to interpret them.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub mrr: f64,
    pub ndcg5: f64,
    pub ndcg10: f64,
    /// Impressions contributing to MRR and nDCG (at least one
    /// positive).
    pub n_impressions: usize,
    /// Impressions contributing to AUC (both classes present).
    pub n_auc_impressions: usize,
    /// Impressions with a positive but no negative, excluded from the
    /// AUC mean only.
    pub n_skipped_single_class: usize,
    /// Impressions with no positive, excluded from every mean.
    pub n_skipped_no_positive: usize,
}

/// Area under the ROC curve in Mann-Whitney form: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting half.
/// None when only one class is present.
pub fn auc(labels: &[u8], scores: &[f64]) -> Option<f64> {
    assert_eq!(labels.len(), scores.len(), "labels and scores must align");
    let n_pos = labels.iter().filter(|&&l| l != 0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("scores must be comparable"));
    // average 1-based ranks over runs of equal scores
    let mut rank_sum_pos = 0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] != 0 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Candidate indices ordered by descending score, ties keeping
/// original candidate order.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable sort, so equal scores stay in candidate order
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("scores must be comparable"));
    order
}

/// Mean reciprocal rank over every positive in the impression. None
/// when there is no positive.
pub fn mrr(labels: &[u8], scores: &[f64]) -> Option<f64> {
    assert_eq!(labels.len(), scores.len(), "labels and scores must align");
    let order = ranking(scores);
    let mut sum = 0f64;
    let mut count = 0usize;
    for (pos, &idx) in order.iter().enumerate() {
        if labels[idx] != 0 {
            sum += 1.0 / (pos + 1) as f64;
            count += 1;
        }
    }
    if count == 0 {
        None
    } else {
        Some(sum / count as f64)
    }
}

/// Binary-gain normalized discounted cumulative gain over the top k.
/// None when there is no positive.
pub fn ndcg_at_k(labels: &[u8], scores: &[f64], k: usize) -> Option<f64> {
    assert_eq!(labels.len(), scores.len(), "labels and scores must align");
    let n_pos = labels.iter().filter(|&&l| l != 0).count();
    if n_pos == 0 {
        return None;
    }
    let order = ranking(scores);
    let top = k.min(order.len());
    let mut dcg = 0f64;
    for (pos, &idx) in order[..top].iter().enumerate() {
        if labels[idx] != 0 {
            dcg += 1.0 / ((pos + 2) as f64).log2();
        }
    }
    let mut idcg = 0f64;
    for pos in 0..n_pos.min(top) {
        idcg += 1.0 / ((pos + 2) as f64).log2();
    }
    Some(dcg / idcg)
}

/// One impression resolved to indices into [`EvalSet::news`].
#[derive(Debug, Clone)]
pub struct EvalImpression {
    pub impression_id: String,
    pub history: Vec<usize>,
    pub candidates: Vec<usize>,
    pub labels: Vec<u8>,
}

/// Deduplicated encodable articles plus the impressions referencing
/// them by position.
#[derive(Debug, Clone, Default)]
pub struct EvalSet {
    pub news: Vec<NewsIndices>,
    pub news_ids: Vec<String>,
    pub impressions: Vec<EvalImpression>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct EvalBuildStats {
    pub impressions: usize,
    /// Impressions dropped because a candidate id was absent from the
    /// corpus.
    pub skipped_unresolvable: usize,
    /// History references to unknown articles, dropped item-wise.
    pub dropped_history_items: usize,
    pub unique_news: usize,
}

/// Resolves raw impressions against the corpus. Each distinct article
/// is indexed once; cold users (empty history) are kept.
pub fn build_eval_set(
    impressions: &[Impression],
    corpus: &HashMap<&str, &NewsRecord>,
    indexer: &NewsIndexer,
) -> (EvalSet, EvalBuildStats) {
    let mut stats = EvalBuildStats::default();
    let mut set = EvalSet::default();
    let mut positions: HashMap<String, usize> = HashMap::new();

    let resolve = |id: &str, set: &mut EvalSet, positions: &mut HashMap<String, usize>| -> Option<usize> {
        if let Some(&p) = positions.get(id) {
            return Some(p);
        }
        let record = corpus.get(id)?;
        let p = set.news.len();
        set.news.push(indexer.index(record));
        set.news_ids.push(id.to_string());
        positions.insert(id.to_string(), p);
        Some(p)
    };

    for imp in impressions {
        let mut candidates = Vec::with_capacity(imp.candidates.len());
        let mut labels = Vec::with_capacity(imp.candidates.len());
        let mut unresolvable = false;
        for (id, label) in &imp.candidates {
            match resolve(id, &mut set, &mut positions) {
                Some(p) => {
                    candidates.push(p);
                    labels.push(*label);
                }
                None => {
                    unresolvable = true;
                    break;
                }
            }
        }
        if unresolvable {
            stats.skipped_unresolvable += 1;
            continue;
        }
        let mut history = Vec::with_capacity(imp.history.len());
        for id in &imp.history {
            match resolve(id, &mut set, &mut positions) {
                Some(p) => history.push(p),
                None => stats.dropped_history_items += 1,
            }
        }
        // the user encoder consumes the most recent items
        let h_max = indexer.config().max_history;
        if history.len() > h_max {
            history.drain(..history.len() - h_max);
        }
        set.impressions.push(EvalImpression {
            impression_id: imp.impression_id.clone(),
            history,
            candidates,
            labels,
        });
        stats.impressions += 1;
    }
    stats.unique_news = set.news.len();
    (set, stats)
}

/// Per-impression candidate scores, for the optional dump.
#[derive(Debug, Clone, Serialize)]
pub struct PredictionRow {
    pub impression_id: String,
    pub news_ids: Vec<String>,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

/// Frozen-model scorer: encodes every article once, then scores each
/// impression as inner products against its user embedding. Cold
/// users score with the zero vector.
pub struct ModelScorer<'a> {
    store: &'a ParameterStore,
    news_vectors: Vec<Tensor>,
}

/// Articles encoded per parallel task; the parameter tables are
/// cloned once per chunk.
const ENCODE_CHUNK: usize = 128;

impl<'a> ModelScorer<'a> {
    pub fn new(store: &'a ParameterStore, cfg: &ModelConfig, set: &EvalSet) -> Result<Self, TensorError> {
        let chunks: Vec<&[NewsIndices]> = set.news.chunks(ENCODE_CHUNK).collect();
        let encoded = par_map(&chunks, |chunk| model::encode_news_batch(store, cfg, chunk));
        let mut news_vectors = Vec::with_capacity(set.news.len());
        for chunk in encoded {
            news_vectors.extend(chunk?);
        }
        Ok(Self { store, news_vectors })
    }

    pub fn scores(&self, imp: &EvalImpression) -> Result<Vec<f64>, TensorError> {
        let history: Vec<&Tensor> = imp.history.iter().map(|&p| &self.news_vectors[p]).collect();
        let user = model::user_vector(self.store, &history)?;
        Ok(imp
            .candidates
            .iter()
            .map(|&p| match &user {
                Some(u) => dot_f64(u.data(), self.news_vectors[p].data()),
                None => 0.0,
            })
            .collect())
    }
}

/// Scores every candidate with its label: a perfect ranker.
pub fn oracle_scores(imp: &EvalImpression) -> Vec<f64> {
    imp.labels.iter().map(|&l| l as f64).collect()
}

/// Scores every candidate with its negated label: a perfectly wrong
/// ranker.
pub fn antioracle_scores(imp: &EvalImpression) -> Vec<f64> {
    imp.labels.iter().map(|&l| -(l as f64)).collect()
}

struct ImpressionOutcome {
    auc: Option<f64>,
    mrr: Option<f64>,
    ndcg5: Option<f64>,
    ndcg10: Option<f64>,
    row: PredictionRow,
}

/// Runs a scoring function over every impression (in parallel) and
/// folds the means in impression order. Returns the report plus one
/// prediction row per scored impression.
pub fn evaluate_with<F>(set: &EvalSet, score_fn: F) -> Result<(MetricReport, Vec<PredictionRow>), TensorError>
where
    F: Fn(&EvalImpression) -> Result<Vec<f64>, TensorError> + Sync,
{
    let outcomes = par_map(&set.impressions, |imp| -> Result<ImpressionOutcome, TensorError> {
        let scores = score_fn(imp)?;
        assert_eq!(
            scores.len(),
            imp.labels.len(),
            "scorer returned {} scores for {} candidates",
            scores.len(),
            imp.labels.len()
        );
        let row = PredictionRow {
            impression_id: imp.impression_id.clone(),
            news_ids: imp.candidates.iter().map(|&p| set.news_ids[p].clone()).collect(),
            scores: scores.clone(),
            labels: imp.labels.clone(),
        };
        Ok(ImpressionOutcome {
            auc: auc(&imp.labels, &scores),
            mrr: mrr(&imp.labels, &scores),
            ndcg5: ndcg_at_k(&imp.labels, &scores, 5),
            ndcg10: ndcg_at_k(&imp.labels, &scores, 10),
            row,
        })
    });

    let mut report = MetricReport::default();
    let mut rows = Vec::with_capacity(set.impressions.len());
    let (mut auc_sum, mut mrr_sum, mut n5_sum, mut n10_sum) = (0f64, 0f64, 0f64, 0f64);
    for outcome in outcomes {
        let o = outcome?;
        rows.push(o.row);
        match o.auc {
            Some(v) => {
                auc_sum += v;
                report.n_auc_impressions += 1;
            }
            // positives without negatives still count for MRR/nDCG
            None if o.mrr.is_some() => report.n_skipped_single_class += 1,
            None => {}
        }
        match (o.mrr, o.ndcg5, o.ndcg10) {
            (Some(m), Some(n5), Some(n10)) => {
                mrr_sum += m;
                n5_sum += n5;
                n10_sum += n10;
                report.n_impressions += 1;
            }
            (None, None, None) => report.n_skipped_no_positive += 1,
            other => unreachable!("metrics disagree on positives: {other:?}"),
        }
    }
    if report.n_auc_impressions > 0 {
        report.auc = auc_sum / report.n_auc_impressions as f64;
    }
    if report.n_impressions > 0 {
        report.mrr = mrr_sum / report.n_impressions as f64;
        report.ndcg5 = n5_sum / report.n_impressions as f64;
        report.ndcg10 = n10_sum / report.n_impressions as f64;
    }
    Ok((report, rows))
}

/// Full evaluation of a trained parameter store on an eval set.
pub fn evaluate_model(
    store: &ParameterStore,
    cfg: &ModelConfig,
    set: &EvalSet,
) -> Result<(MetricReport, Vec<PredictionRow>), TensorError> {
    let scorer = ModelScorer::new(store, cfg, set)?;
    evaluate_with(set, |imp| scorer.scores(imp))
}
