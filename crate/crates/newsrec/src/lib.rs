//! Attention-based news recommendation with LLM-assisted article
//! enrichment, trained end to end on a hand-built autodiff core.
//!
//! The crate is organized bottom-up: dense tensors and a reverse-mode
//! tape, parameter storage and Adam, data loading for click logs and
//! pretrained embeddings, article enrichment against a language-model
//! client, the news/user encoder model, the training loop, and ranking
//! evaluation.

pub mod data;
pub mod enrich;
pub mod eval;
pub mod fixtures;
pub mod gradcheck;
pub mod model;
pub mod hash;
pub mod optim;
pub mod par;
pub mod tape;
pub mod tensor;
pub mod train;
