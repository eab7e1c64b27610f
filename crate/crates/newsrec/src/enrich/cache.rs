//! Append-only response cache, one JSON record per line.
//!
//! A present key is never re-queried, which is what makes enrichment
//! resumable and warm reruns free of client calls. Writes are
//! serialized through a mutex so parallel workers can append safely;
//! identical keys always carry identical values (responses are
//! deterministic in the key), so last-write-wins on load is sound.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::EnrichError;

/// Cache key: which article, which step, which template generation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub news_id: String,
    pub step: String,
    pub prompt_version: String,
}

impl CacheKey {
    pub fn new(news_id: &str, step: &str, prompt_version: &str) -> Self {
        Self {
            news_id: news_id.to_string(),
            step: step.to_string(),
            prompt_version: prompt_version.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    news_id: String,
    step: String,
    prompt_version: String,
    value: String,
    timestamp: u64,
}

struct Inner {
    map: HashMap<CacheKey, String>,
    file: Option<File>,
}

/// Shared response cache, optionally persisted to a JSONL file.
pub struct EnrichmentCache {
    inner: Mutex<Inner>,
    skipped_lines: usize,
}

impl EnrichmentCache {
    /// Opens (creating if needed) a file-backed cache. Unparseable
    /// lines, such as a torn final line from an interrupted run, are
    /// skipped and counted, never fatal.
    pub fn open(path: &Path) -> Result<Self, EnrichError> {
        let mut map = HashMap::new();
        let mut skipped_lines = 0;
        if path.exists() {
            let content = std::fs::read_to_string(path)?;
            for line in content.lines() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(line) {
                    Ok(r) => {
                        map.insert(
                            CacheKey::new(&r.news_id, &r.step, &r.prompt_version),
                            r.value,
                        );
                    }
                    Err(_) => skipped_lines += 1,
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner: Mutex::new(Inner {
                map,
                file: Some(file),
            }),
            skipped_lines,
        })
    }

    /// Cache with no backing file, for tests and throwaway runs.
    pub fn in_memory() -> Self {
        Self {
            inner: Mutex::new(Inner {
                map: HashMap::new(),
                file: None,
            }),
            skipped_lines: 0,
        }
    }

    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache poisoned").map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &CacheKey) -> Option<String> {
        self.inner.lock().expect("cache poisoned").map.get(key).cloned()
    }

    /// Records a response and appends it to the backing file.
    pub fn put(&self, key: &CacheKey, value: &str) -> Result<(), EnrichError> {
        let mut inner = self.inner.lock().expect("cache poisoned");
        inner.map.insert(key.clone(), value.to_string());
        if let Some(file) = inner.file.as_mut() {
            let record = CacheRecord {
                news_id: key.news_id.clone(),
                step: key.step.clone(),
                prompt_version: key.prompt_version.clone(),
                value: value.to_string(),
                timestamp: std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            };
            let mut line = serde_json::to_string(&record).expect("cache records always serialize");
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        Ok(())
    }
}
