//! Token and id bookkeeping for words, entity QIDs and categories.
//!
//! Index 0 is always the padding id and index 1 the out-of-vocabulary
//! id. Real entries start at 2, ordered by descending corpus count
//! with lexicographic tie-break, which makes the mapping reproducible
//! across runs and platforms.

use std::collections::HashMap;

use crate::hash::fnv1a64;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Lowercases, splits on Unicode whitespace, and strips leading and
/// trailing non-alphanumeric characters from each piece. Interior
/// punctuation survives ("trump's" stays one token); pieces that strip
/// to nothing are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Bidirectional token/id map with reserved padding and OOV slots.
#[derive(Debug, Clone)]
pub struct Vocab {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
}

impl Vocab {
    /// Builds a vocabulary from a raw token stream, keeping tokens
    /// seen at least `min_count` times (values below 1 behave as 1).
    pub fn build<'a, I>(tokens: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        let threshold = min_count.max(1);
        let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|(_, c)| *c >= threshold).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut id_to_token = Vec::with_capacity(kept.len() + 2);
        id_to_token.push(PAD_TOKEN.to_string());
        id_to_token.push(UNK_TOKEN.to_string());
        id_to_token.extend(kept.iter().map(|(t, _)| t.to_string()));
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            token_to_id,
            id_to_token,
        }
    }

    /// Id of a token, or the OOV id when absent.
    pub fn id(&self, token: &str) -> u32 {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.id_to_token[id as usize]
    }

    /// Total entry count including the two reserved slots.
    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Tokens in id order, reserved slots first.
    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// Stable fingerprint of the full mapping, for checkpoint
    /// compatibility checks.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::new();
        for t in &self.id_to_token {
            bytes.extend_from_slice(t.as_bytes());
            bytes.push(0);
        }
        fnv1a64(&bytes)
    }
}
