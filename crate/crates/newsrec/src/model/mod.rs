//! The recommendation model: a three-view news encoder (title,
//! entities, category) fused by attention, an attention-pooled user
//! encoder over clicked history, and an inner-product click scorer.
//!
//! Every parameter lives in a [`ParameterStore`] under a stable name,
//! created in one fixed order so seeded initialization, gradient
//! extraction, and checkpoints all agree. Encoders are written
//! against tape node ids; training binds the whole store to one tape,
//! while inference helpers bind per call and read values back out.

pub mod checkpoint;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::sampling::{NewsIndices, TrainingExample};
use crate::optim::ParameterStore;
use crate::tape::{AdditiveAttentionNodes, NodeId, SelfAttentionNodes, Tape};
use crate::tensor::{Tensor, TensorError};

use std::collections::HashMap;

/// Architecture hyperparameters plus the vocabulary sizes the tables
/// were built for. Serialized into every checkpoint sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub entity_dim: usize,
    pub category_dim: usize,
    /// Convolution filter count and the shared width of all three
    /// views, the user embedding, and the news embedding.
    pub news_dim: usize,
    pub conv_window: usize,
    pub attention_dim: usize,
    pub self_attention_heads: usize,
    /// When set, the subcategory embedding is concatenated to the
    /// category embedding before the dense view projection.
    pub use_subcategory: bool,
    pub word_vocab: usize,
    pub entity_vocab: usize,
    pub category_vocab: usize,
    pub subcategory_vocab: usize,
}

impl ModelConfig {
    /// Default dimensions over the given vocabulary sizes.
    pub fn defaults_for_vocabs(
        word_vocab: usize,
        entity_vocab: usize,
        category_vocab: usize,
        subcategory_vocab: usize,
    ) -> Self {
        Self {
            word_dim: 300,
            entity_dim: 100,
            category_dim: 100,
            news_dim: 400,
            conv_window: 3,
            attention_dim: 200,
            self_attention_heads: 4,
            use_subcategory: false,
            word_vocab,
            entity_vocab,
            category_vocab,
            subcategory_vocab,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("word_dim", self.word_dim),
            ("entity_dim", self.entity_dim),
            ("category_dim", self.category_dim),
            ("news_dim", self.news_dim),
            ("attention_dim", self.attention_dim),
            ("self_attention_heads", self.self_attention_heads),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ModelError::BadConfig {
                    message: format!("{name} must be positive"),
                });
            }
        }
        if self.conv_window % 2 == 0 || self.conv_window == 0 {
            return Err(ModelError::BadConfig {
                message: format!("conv_window must be odd, got {}", self.conv_window),
            });
        }
        if self.entity_dim % self.self_attention_heads != 0 {
            return Err(ModelError::BadConfig {
                message: format!(
                    "entity_dim {} not divisible by self_attention_heads {}",
                    self.entity_dim, self.self_attention_heads
                ),
            });
        }
        // every vocabulary carries at least the padding and OOV rows
        for (name, v) in [
            ("word_vocab", self.word_vocab),
            ("entity_vocab", self.entity_vocab),
            ("category_vocab", self.category_vocab),
        ] {
            if v < 2 {
                return Err(ModelError::BadConfig {
                    message: format!("{name} must be at least 2, got {v}"),
                });
            }
        }
        if self.use_subcategory && self.subcategory_vocab < 2 {
            return Err(ModelError::BadConfig {
                message: format!(
                    "subcategory_vocab must be at least 2 when subcategories are used, got {}",
                    self.subcategory_vocab
                ),
            });
        }
        Ok(())
    }

    fn category_input_dim(&self) -> usize {
        if self.use_subcategory {
            2 * self.category_dim
        } else {
            self.category_dim
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {message}")]
    BadConfig { message: String },
    #[error("pretrained {name} has shape {got:?}, expected {expected:?}")]
    PretrainedShape {
        name: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("checkpoint tensor set mismatch: {message}")]
    TensorSet { message: String },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Copy)]
enum Init {
    PretrainedWord,
    PretrainedEntity,
    /// Uniform(-0.1, 0.1) with the padding row zeroed and frozen.
    Embedding,
    /// Uniform Xavier over (fan_in = cols, fan_out = rows).
    Xavier,
    Zeros,
    /// Uniform(-0.1, 0.1) attention query vector.
    Query,
}

struct ParamSpec {
    name: &'static str,
    shape: Vec<usize>,
    init: Init,
}

impl ParamSpec {
    fn matrix(name: &'static str, rows: usize, cols: usize, init: Init) -> Self {
        Self {
            name,
            shape: vec![rows, cols],
            init,
        }
    }

    fn vector(name: &'static str, len: usize, init: Init) -> Self {
        Self {
            name,
            shape: vec![len],
            init,
        }
    }

    fn frozen_pad_row(&self) -> bool {
        matches!(
            self.init,
            Init::PretrainedWord | Init::PretrainedEntity | Init::Embedding
        )
    }
}

/// The canonical parameter list. Creation order is the store order,
/// the checkpoint order, and the gradient order; changing it breaks
/// existing checkpoints.
fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let a = cfg.attention_dim;
    let d = cfg.news_dim;
    let mut specs = vec![
        ParamSpec::matrix("word_emb", cfg.word_vocab, cfg.word_dim, Init::PretrainedWord),
        ParamSpec::matrix("entity_emb", cfg.entity_vocab, cfg.entity_dim, Init::PretrainedEntity),
        ParamSpec::matrix("category_emb", cfg.category_vocab, cfg.category_dim, Init::Embedding),
    ];
    if cfg.use_subcategory {
        specs.push(ParamSpec::matrix(
            "subcategory_emb",
            cfg.subcategory_vocab,
            cfg.category_dim,
            Init::Embedding,
        ));
    }
    specs.extend([
        ParamSpec::matrix("conv_filters", d, cfg.conv_window * cfg.word_dim, Init::Xavier),
        ParamSpec::matrix("title_attention_projection", a, d, Init::Xavier),
        ParamSpec::vector("title_attention_bias", a, Init::Zeros),
        ParamSpec::vector("title_attention_query", a, Init::Query),
        ParamSpec::matrix("entity_self_attention_query", cfg.entity_dim, cfg.entity_dim, Init::Xavier),
        ParamSpec::matrix("entity_self_attention_key", cfg.entity_dim, cfg.entity_dim, Init::Xavier),
        ParamSpec::matrix("entity_self_attention_value", cfg.entity_dim, cfg.entity_dim, Init::Xavier),
        ParamSpec::matrix("entity_attention_projection", a, cfg.entity_dim, Init::Xavier),
        ParamSpec::vector("entity_attention_bias", a, Init::Zeros),
        ParamSpec::vector("entity_attention_query", a, Init::Query),
        ParamSpec::matrix("entity_projection_weight", d, cfg.entity_dim, Init::Xavier),
        ParamSpec::vector("entity_projection_bias", d, Init::Zeros),
        ParamSpec::matrix("category_projection_weight", d, cfg.category_input_dim(), Init::Xavier),
        ParamSpec::vector("category_projection_bias", d, Init::Zeros),
        ParamSpec::matrix("view_attention_projection", a, d, Init::Xavier),
        ParamSpec::vector("view_attention_bias", a, Init::Zeros),
        ParamSpec::vector("view_attention_query", a, Init::Query),
        ParamSpec::matrix("user_attention_projection", a, d, Init::Xavier),
        ParamSpec::vector("user_attention_bias", a, Init::Zeros),
        ParamSpec::vector("user_attention_query", a, Init::Query),
    ]);
    specs
}

fn uniform_tensor(rng: &mut ChaCha8Rng, shape: &[usize], limit: f32) -> Tensor {
    let len: usize = shape.iter().product();
    let data = (0..len).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::new(shape.to_vec(), data)
}

/// Builds a freshly initialized parameter store. Pretrained word and
/// entity tables are adopted verbatim when given (their padding row
/// must already be zero); otherwise tables start uniform in
/// (-0.1, 0.1). Matrices are Xavier-uniform, biases zero, attention
/// queries uniform in (-0.1, 0.1). The same seed always produces the
/// same store.
pub fn init_params(
    cfg: &ModelConfig,
    word_init: Option<&Tensor>,
    entity_init: Option<&Tensor>,
    seed: u64,
) -> Result<ParameterStore, ModelError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParameterStore::new();
    for spec in param_specs(cfg) {
        let pretrained = match spec.init {
            Init::PretrainedWord => word_init,
            Init::PretrainedEntity => entity_init,
            _ => None,
        };
        let value = match (spec.init, pretrained) {
            (Init::PretrainedWord | Init::PretrainedEntity, Some(t)) => {
                if t.shape() != spec.shape.as_slice() {
                    return Err(ModelError::PretrainedShape {
                        name: spec.name,
                        expected: spec.shape.clone(),
                        got: t.shape().to_vec(),
                    });
                }
                t.clone()
            }
            (Init::PretrainedWord | Init::PretrainedEntity | Init::Embedding, _) => {
                let mut t = uniform_tensor(&mut rng, &spec.shape, 0.1);
                t.row_mut(0).fill(0.0);
                t
            }
            (Init::Xavier, _) => {
                let (rows, cols) = (spec.shape[0], spec.shape[1]);
                let limit = (6.0 / (rows + cols) as f32).sqrt();
                uniform_tensor(&mut rng, &spec.shape, limit)
            }
            (Init::Zeros, _) => Tensor::zeros(spec.shape.clone()),
            (Init::Query, _) => uniform_tensor(&mut rng, &spec.shape, 0.1),
        };
        if spec.frozen_pad_row() {
            store.insert_with_frozen_rows(spec.name, value, vec![0]);
        } else {
            store.insert(spec.name, value);
        }
    }
    Ok(store)
}

/// Rebuilds a parameter store from named checkpoint tensors,
/// validating names, order, and shapes against the config and
/// re-applying the frozen padding rows.
pub fn restore_params(cfg: &ModelConfig, tensors: &[(String, Tensor)]) -> Result<ParameterStore, ModelError> {
    cfg.validate()?;
    let specs = param_specs(cfg);
    if specs.len() != tensors.len() {
        return Err(ModelError::TensorSet {
            message: format!("expected {} tensors, found {}", specs.len(), tensors.len()),
        });
    }
    let mut store = ParameterStore::new();
    for (spec, (name, tensor)) in specs.iter().zip(tensors) {
        if spec.name != name {
            return Err(ModelError::TensorSet {
                message: format!("expected tensor {:?}, found {:?}", spec.name, name),
            });
        }
        if spec.shape.as_slice() != tensor.shape() {
            return Err(ModelError::TensorSet {
                message: format!(
                    "tensor {:?} has shape {:?}, expected {:?}",
                    name,
                    tensor.shape(),
                    spec.shape
                ),
            });
        }
        if spec.frozen_pad_row() {
            store.insert_with_frozen_rows(spec.name, tensor.clone(), vec![0]);
        } else {
            store.insert(spec.name, tensor.clone());
        }
    }
    Ok(store)
}

/// Node ids of every parameter on one tape, in store order.
pub struct BoundParams {
    pub word_emb: NodeId,
    pub entity_emb: NodeId,
    pub category_emb: NodeId,
    pub subcategory_emb: Option<NodeId>,
    pub conv_filters: NodeId,
    pub title_attention: AdditiveAttentionNodes,
    pub entity_self_attention: SelfAttentionNodes,
    pub entity_attention: AdditiveAttentionNodes,
    pub entity_projection_weight: NodeId,
    pub entity_projection_bias: NodeId,
    pub category_projection_weight: NodeId,
    pub category_projection_bias: NodeId,
    pub view_attention: AdditiveAttentionNodes,
    pub user_attention: AdditiveAttentionNodes,
    leaf_ids: Vec<NodeId>,
}

impl BoundParams {
    /// Leafs every parameter onto the tape, in store order.
    pub fn bind(tape: &mut Tape, store: &ParameterStore, cfg: &ModelConfig) -> Self {
        let leaves: Vec<NodeId> = store.iter().map(|p| tape.leaf(p.value.clone())).collect();
        Self::from_leaves(cfg, &leaves)
    }

    /// Wires existing leaf ids (one per parameter, in store order)
    /// into named fields.
    pub fn from_leaves(cfg: &ModelConfig, leaves: &[NodeId]) -> Self {
        let specs = param_specs(cfg);
        assert_eq!(
            specs.len(),
            leaves.len(),
            "leaf count {} does not match parameter count {}",
            leaves.len(),
            specs.len()
        );
        let mut by_name: HashMap<&'static str, NodeId> = HashMap::new();
        for (spec, &id) in specs.iter().zip(leaves) {
            by_name.insert(spec.name, id);
        }
        let get = |name: &str| *by_name.get(name).expect("parameter name missing from specs");
        Self {
            word_emb: get("word_emb"),
            entity_emb: get("entity_emb"),
            category_emb: get("category_emb"),
            subcategory_emb: by_name.get("subcategory_emb").copied(),
            conv_filters: get("conv_filters"),
            title_attention: AdditiveAttentionNodes {
                projection: get("title_attention_projection"),
                bias: get("title_attention_bias"),
                query: get("title_attention_query"),
            },
            entity_self_attention: SelfAttentionNodes {
                query: get("entity_self_attention_query"),
                key: get("entity_self_attention_key"),
                value: get("entity_self_attention_value"),
            },
            entity_attention: AdditiveAttentionNodes {
                projection: get("entity_attention_projection"),
                bias: get("entity_attention_bias"),
                query: get("entity_attention_query"),
            },
            entity_projection_weight: get("entity_projection_weight"),
            entity_projection_bias: get("entity_projection_bias"),
            category_projection_weight: get("category_projection_weight"),
            category_projection_bias: get("category_projection_bias"),
            view_attention: AdditiveAttentionNodes {
                projection: get("view_attention_projection"),
                bias: get("view_attention_bias"),
                query: get("view_attention_query"),
            },
            user_attention: AdditiveAttentionNodes {
                projection: get("user_attention_projection"),
                bias: get("user_attention_bias"),
                query: get("user_attention_query"),
            },
            leaf_ids: leaves.to_vec(),
        }
    }

    /// Parameter leaf ids in store order, for gradient extraction.
    pub fn leaf_ids(&self) -> &[NodeId] {
        &self.leaf_ids
    }
}

/// Inverted-dropout state for word embeddings during training.
pub struct WordDropout {
    rate: f32,
    rng: ChaCha8Rng,
}

impl WordDropout {
    /// Panics unless 0 < rate < 1; a zero rate means no dropout and
    /// callers pass None instead.
    pub fn new(rate: f32, seed: u64) -> Self {
        assert!(rate > 0.0 && rate < 1.0, "dropout rate must be in (0, 1), got {rate}");
        Self {
            rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Keep mask scaled by 1/(1-rate), so expected activations match
    /// inference, which applies no mask.
    fn mask(&mut self, rows: usize, cols: usize) -> Tensor {
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        let data = (0..rows * cols)
            .map(|_| if self.rng.gen::<f32>() < keep { scale } else { 0.0 })
            .collect();
        Tensor::matrix(rows, cols, data)
    }
}

/// Length of the leading true run. Masks here are always a true
/// prefix followed by padding.
fn real_len(mask: &[bool]) -> usize {
    mask.iter().take_while(|&&m| m).count()
}

fn ids_prefix(ids: &[u32], n: usize) -> Vec<usize> {
    ids[..n].iter().map(|&t| t as usize).collect()
}

/// Title view: word embeddings, 1-D convolution over the token
/// sequence, additive attention pooling. Padding positions are
/// trimmed before encoding; because the padding embedding row is
/// pinned to zero this matches encoding the full padded grid with a
/// mask, value for value.
pub fn encode_title_view(
    tape: &mut Tape,
    p: &BoundParams,
    cfg: &ModelConfig,
    news: &NewsIndices,
    dropout: Option<&mut WordDropout>,
) -> Result<NodeId, TensorError> {
    let n = real_len(&news.token_mask).max(1);
    let emb = tape.embed_lookup(p.word_emb, &ids_prefix(&news.tokens, n))?;
    let emb = match dropout {
        Some(d) => {
            let mask = tape.leaf(d.mask(n, cfg.word_dim));
            tape.mul_elem(emb, mask)?
        }
        None => emb,
    };
    let conv = tape.conv1d(emb, p.conv_filters, cfg.conv_window)?;
    let (_, pooled) = tape.additive_attention(conv, p.title_attention, &vec![true; n])?;
    Ok(pooled)
}

/// Entity view: entity embeddings, multi-head self-attention,
/// additive attention pooling, then a linear map to the common view
/// width. Articles with no usable entities get no entity view; the
/// view fusion masks the slot out instead.
pub fn encode_entity_view(
    tape: &mut Tape,
    p: &BoundParams,
    cfg: &ModelConfig,
    news: &NewsIndices,
) -> Result<Option<NodeId>, TensorError> {
    let n = real_len(&news.entity_mask);
    if n == 0 {
        return Ok(None);
    }
    let emb = tape.embed_lookup(p.entity_emb, &ids_prefix(&news.entities, n))?;
    let mixed = tape.self_attention(emb, p.entity_self_attention, cfg.self_attention_heads, &vec![true; n])?;
    let (_, pooled) = tape.additive_attention(mixed, p.entity_attention, &vec![true; n])?;
    let proj = tape.matvec(p.entity_projection_weight, pooled)?;
    Ok(Some(tape.add(proj, p.entity_projection_bias)?))
}

/// Category view: learned category embedding (optionally concatenated
/// with the subcategory embedding) through a dense layer with ReLU.
pub fn encode_category_view(
    tape: &mut Tape,
    p: &BoundParams,
    cfg: &ModelConfig,
    news: &NewsIndices,
) -> Result<NodeId, TensorError> {
    let cat = tape.embed_lookup(p.category_emb, &[news.category as usize])?;
    let joined = match p.subcategory_emb {
        Some(sub_table) => {
            let sub = tape.embed_lookup(sub_table, &[news.subcategory as usize])?;
            tape.concat_cols(&[cat, sub])?
        }
        None => cat,
    };
    let vec = tape.reshape(joined, vec![cfg.category_input_dim()])?;
    let dense = tape.matvec(p.category_projection_weight, vec)?;
    let dense = tape.add(dense, p.category_projection_bias)?;
    Ok(tape.relu(dense))
}

/// Fuses the three views by additive attention into one news
/// embedding. View order is title, entity, category; a missing entity
/// view becomes a masked zero row, so the attention renormalizes over
/// the other two.
pub fn encode_news(
    tape: &mut Tape,
    p: &BoundParams,
    cfg: &ModelConfig,
    news: &NewsIndices,
    dropout: Option<&mut WordDropout>,
) -> Result<NodeId, TensorError> {
    let d = cfg.news_dim;
    let title = encode_title_view(tape, p, cfg, news, dropout)?;
    let entity = encode_entity_view(tape, p, cfg, news)?;
    let category = encode_category_view(tape, p, cfg, news)?;
    let (views, mask) = match entity {
        Some(e) => (
            tape.concat_rows(&[title, e, category])?,
            vec![true, true, true],
        ),
        None => {
            let zero_row = tape.leaf(Tensor::zeros(vec![d]));
            (
                tape.concat_rows(&[title, zero_row, category])?,
                vec![true, false, true],
            )
        }
    };
    let (_, pooled) = tape.additive_attention(views, p.view_attention, &mask)?;
    Ok(pooled)
}

/// Additive attention pooling over history news embeddings. An empty
/// history (cold user, evaluation only) yields None; callers score
/// with the zero vector.
pub fn encode_user(tape: &mut Tape, p: &BoundParams, history: &[NodeId]) -> Result<Option<NodeId>, TensorError> {
    if history.is_empty() {
        return Ok(None);
    }
    let seq = tape.concat_rows(history)?;
    let (_, pooled) = tape.additive_attention(seq, p.user_attention, &vec![true; history.len()])?;
    Ok(Some(pooled))
}

/// Click score: inner product of user and candidate embeddings.
pub fn score(tape: &mut Tape, user: NodeId, candidate: NodeId) -> Result<NodeId, TensorError> {
    tape.dot(user, candidate)
}

/// Per-tape memo so an article appearing in several histories or
/// candidate lists is encoded once. Disabled while dropout is active:
/// sharing one dropout mask across occurrences would couple them.
#[derive(Default)]
pub struct NewsCache {
    map: HashMap<NewsIndices, NodeId>,
}

impl NewsCache {
    pub fn new() -> Self {
        Self::default()
    }
}

pub fn encode_news_cached(
    tape: &mut Tape,
    p: &BoundParams,
    cfg: &ModelConfig,
    cache: &mut NewsCache,
    news: &NewsIndices,
    dropout: Option<&mut WordDropout>,
) -> Result<NodeId, TensorError> {
    if dropout.is_some() {
        return encode_news(tape, p, cfg, news, dropout);
    }
    if let Some(&id) = cache.map.get(news) {
        return Ok(id);
    }
    let id = encode_news(tape, p, cfg, news, None)?;
    cache.map.insert(news.clone(), id);
    Ok(id)
}

/// Loss for one (1+K)-way example: candidate scores against the user
/// embedding, softmax cross-entropy with the clicked slot as target.
pub fn example_loss(
    tape: &mut Tape,
    p: &BoundParams,
    cfg: &ModelConfig,
    cache: &mut NewsCache,
    example: &TrainingExample,
    mut dropout: Option<&mut WordDropout>,
) -> Result<NodeId, TensorError> {
    let mut history_nodes = Vec::new();
    for (slot, &real) in example.history.iter().zip(&example.history_mask) {
        if real {
            history_nodes.push(encode_news_cached(tape, p, cfg, cache, slot, dropout.as_deref_mut())?);
        }
    }
    // training examples always carry at least one real history item
    let user = encode_user(tape, p, &history_nodes)?.ok_or(TensorError::FullyMasked)?;
    let mut candidate_rows = Vec::with_capacity(example.candidates.len());
    for cand in &example.candidates {
        candidate_rows.push(encode_news_cached(tape, p, cfg, cache, cand, dropout.as_deref_mut())?);
    }
    let stacked = tape.concat_rows(&candidate_rows)?;
    let logits = tape.matvec(stacked, user)?;
    tape.softmax_cross_entropy(logits, example.target)
}

/// Mean example loss over a batch. Batch members share parameter
/// leaves and the per-article memo but are otherwise independent, so
/// the batch loss equals the mean of individually computed losses.
pub fn batch_loss(
    tape: &mut Tape,
    p: &BoundParams,
    cfg: &ModelConfig,
    examples: &[TrainingExample],
    mut dropout: Option<&mut WordDropout>,
) -> Result<NodeId, TensorError> {
    let mut cache = NewsCache::new();
    let mut losses = Vec::with_capacity(examples.len());
    for ex in examples {
        losses.push(example_loss(tape, p, cfg, &mut cache, ex, dropout.as_deref_mut())?);
    }
    tape.mean_scalars(&losses)
}

/// Frozen-parameter inference: encodes a batch of articles on one
/// tape and returns their embedding vectors. Chunking across threads
/// is the caller's concern; each call is independent.
pub fn encode_news_batch(
    store: &ParameterStore,
    cfg: &ModelConfig,
    items: &[NewsIndices],
) -> Result<Vec<Tensor>, TensorError> {
    let mut tape = Tape::new();
    let p = BoundParams::bind(&mut tape, store, cfg);
    let mut cache = NewsCache::new();
    let mut out = Vec::with_capacity(items.len());
    for n in items {
        let id = encode_news_cached(&mut tape, &p, cfg, &mut cache, n, None)?;
        out.push(tape.value(id).clone());
    }
    Ok(out)
}

/// Frozen-parameter user embedding from already-encoded history
/// vectors. Empty history yields None (cold user).
pub fn user_vector(
    store: &ParameterStore,
    history: &[&Tensor],
) -> Result<Option<Tensor>, TensorError> {
    if history.is_empty() {
        return Ok(None);
    }
    let rows: Vec<Vec<f32>> = history.iter().map(|t| t.data().to_vec()).collect();
    let mut tape = Tape::new();
    let seq = tape.leaf(Tensor::from_rows(&rows));
    let params = AdditiveAttentionNodes {
        projection: tape.leaf(store.value("user_attention_projection").clone()),
        bias: tape.leaf(store.value("user_attention_bias").clone()),
        query: tape.leaf(store.value("user_attention_query").clone()),
    };
    let (_, pooled) = tape.additive_attention(seq, params, &vec![true; history.len()])?;
    Ok(Some(tape.value(pooled).clone()))
}
