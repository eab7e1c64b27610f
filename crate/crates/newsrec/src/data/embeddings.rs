//! Loaders for pretrained word and entity vector files.
//!
//! Both formats are line-oriented text: a key followed by the vector
//! components, space-separated for word vectors and tab-separated for
//! entity vectors. The dimension is inferred from the first line and
//! any later disagreement is fatal. Keys absent from the file get
//! seeded uniform(-0.1, 0.1) rows so they can train from scratch;
//! the padding row is always zero.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::vocab::Vocab;
use super::DataError;
use crate::hash::fnv1a64_pair;
use crate::tensor::Tensor;

/// Coverage summary of one embedding load.
#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingStats {
    pub rows: usize,
    pub dim: usize,
    /// Vocabulary entries (reserved slots excluded) found in the file.
    pub found: usize,
    /// Vocabulary entries that fell back to seeded random rows.
    pub missing: usize,
    pub coverage: f64,
}

enum FieldSep {
    Whitespace,
    Tab,
}

/// Seeded fallback row for a key absent from the file. Keyed by the
/// token itself so the row does not depend on which other tokens are
/// in the vocabulary.
pub fn fallback_row(seed: u64, token: &str, dim: usize) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64_pair(seed, token));
    (0..dim).map(|_| rng.gen_range(-0.1..0.1)).collect()
}

fn load_table(
    path: &Path,
    vocab: &Vocab,
    seed: u64,
    sep: FieldSep,
    expected_dim: Option<usize>,
) -> Result<(Tensor, EmbeddingStats), DataError> {
    let content = std::fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let mut dim: Option<usize> = None;
    let mut vectors: HashMap<String, Vec<f32>> = HashMap::new();

    for (ix, raw) in content.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut fields: Vec<&str> = match sep {
            FieldSep::Whitespace => line.split_whitespace().collect(),
            FieldSep::Tab => line.split('\t').collect(),
        };
        if fields.len() < 2 {
            return Err(DataError::Format {
                path: path_str.clone(),
                line: ix + 1,
                message: "expected a key and at least one component".into(),
            });
        }
        let key = fields.remove(0);
        let mut row = Vec::with_capacity(fields.len());
        for f in &fields {
            row.push(f.parse::<f32>().map_err(|e| DataError::Format {
                path: path_str.clone(),
                line: ix + 1,
                message: format!("component {f:?}: {e}"),
            })?);
        }
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(DataError::Format {
                    path: path_str.clone(),
                    line: ix + 1,
                    message: format!("dimension {} disagrees with {}", row.len(), d),
                });
            }
            _ => {}
        }
        if vocab.contains(key) {
            vectors.insert(key.to_string(), row);
        }
    }

    let dim = dim.ok_or_else(|| DataError::Format {
        path: path_str.clone(),
        line: 1,
        message: "empty vector file, cannot infer dimension".into(),
    })?;
    if let Some(expect) = expected_dim {
        if expect != dim {
            return Err(DataError::Format {
                path: path_str,
                line: 1,
                message: format!("expected dimension {expect}, file has {dim}"),
            });
        }
    }

    let rows = vocab.len();
    let mut data = vec![0.0f32; rows * dim];
    let mut found = 0;
    let mut missing = 0;
    for id in 1..rows {
        let token = vocab.token(id as u32);
        let row = match vectors.get(token) {
            Some(v) => {
                if id >= 2 {
                    found += 1;
                }
                v.clone()
            }
            None => {
                if id >= 2 {
                    missing += 1;
                }
                fallback_row(seed, token, dim)
            }
        };
        data[id * dim..(id + 1) * dim].copy_from_slice(&row);
    }
    // reserved slots never count toward coverage
    let real = rows.saturating_sub(2);
    let stats = EmbeddingStats {
        rows,
        dim,
        found,
        missing,
        coverage: if real == 0 { 0.0 } else { found as f64 / real as f64 },
    };
    Ok((Tensor::matrix(rows, dim, data), stats))
}

/// Loads space-separated word vectors ("token v1 v2 ... vd") for a
/// vocabulary. Dimension is inferred from the first line.
pub fn load_word_embeddings(
    path: &Path,
    vocab: &Vocab,
    seed: u64,
) -> Result<(Tensor, EmbeddingStats), DataError> {
    load_table(path, vocab, seed, FieldSep::Whitespace, None)
}

/// Loads tab-separated entity vectors ("QID\tv1\t...\tvd") for an
/// entity vocabulary. Entities absent from the file (newly surfaced
/// ones) get seeded random rows.
pub fn load_entity_embeddings(
    path: &Path,
    vocab: &Vocab,
    seed: u64,
) -> Result<(Tensor, EmbeddingStats), DataError> {
    load_table(path, vocab, seed, FieldSep::Tab, None)
}

/// Fresh table of seeded random rows with a zero padding row, for id
/// spaces that have no pretrained file (categories).
pub fn random_table(vocab: &Vocab, dim: usize, seed: u64) -> Tensor {
    let rows = vocab.len();
    let mut data = vec![0.0f32; rows * dim];
    for id in 1..rows {
        let row = fallback_row(seed, vocab.token(id as u32), dim);
        data[id * dim..(id + 1) * dim].copy_from_slice(&row);
    }
    Tensor::matrix(rows, dim, data)
}
