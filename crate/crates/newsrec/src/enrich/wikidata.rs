//! Entity verification against the Wikidata search API, with an
//! offline fixture implementation for tests and air-gapped runs.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EnrichError;

/// One search hit: canonical identity plus the names it answers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WikidataHit {
    pub qid: String,
    pub label: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

/// Entity-search interface. Implementations return hits in ranked
/// order; the caller applies the acceptance rule.
pub trait WikidataClient: Send + Sync {
    fn search(&self, name: &str) -> Result<Vec<WikidataHit>, EnrichError>;

    fn kind(&self) -> &'static str;
}

/// Lowercases, strips punctuation, and collapses whitespace, so
/// "U.S." and "us" compare equal and "New   York" matches "new york".
pub fn normalize_surface(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.chars() {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(c.to_lowercase());
        } else if c.is_whitespace() {
            pending_space = true;
        }
        // other punctuation contributes nothing, not even a break:
        // "U.S." collapses to "us"
    }
    out
}

/// First hit whose label or any alias equals the surface name after
/// normalization; None when no hit qualifies.
pub fn accept_hit<'a>(surface: &str, hits: &'a [WikidataHit]) -> Option<&'a WikidataHit> {
    let wanted = normalize_surface(surface);
    if wanted.is_empty() {
        return None;
    }
    hits.iter().find(|h| {
        normalize_surface(&h.label) == wanted || h.aliases.iter().any(|a| normalize_surface(a) == wanted)
    })
}

#[derive(Deserialize)]
struct ApiSearchItem {
    id: String,
    #[serde(default)]
    label: String,
    #[serde(default)]
    aliases: Vec<String>,
}

#[derive(Deserialize)]
struct ApiSearchResponse {
    #[serde(default)]
    search: Vec<ApiSearchItem>,
}

/// Live client for `GET https://www.wikidata.org/w/api.php` with
/// `action=wbsearchentities`.
pub struct LiveWikidata {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl Default for LiveWikidata {
    fn default() -> Self {
        Self::new("https://www.wikidata.org/w/api.php")
    }
}

impl LiveWikidata {
    pub fn new(endpoint: &str) -> Self {
        Self {
            endpoint: endpoint.to_string(),
            client: reqwest::blocking::Client::builder()
                .timeout(std::time::Duration::from_secs(30))
                .build()
                .expect("client construction is infallible with these options"),
        }
    }
}

impl WikidataClient for LiveWikidata {
    fn search(&self, name: &str) -> Result<Vec<WikidataHit>, EnrichError> {
        let resp = self
            .client
            .get(&self.endpoint)
            .query(&[
                ("action", "wbsearchentities"),
                ("format", "json"),
                ("language", "en"),
                ("search", name),
            ])
            .send()
            .map_err(|e| EnrichError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(EnrichError::Transport(format!("status {status}")));
        }
        let body: ApiSearchResponse = resp.json().map_err(|e| EnrichError::Transport(e.to_string()))?;
        Ok(body
            .search
            .into_iter()
            .map(|i| WikidataHit {
                qid: i.id,
                label: i.label,
                aliases: i.aliases,
            })
            .collect())
    }

    fn kind(&self) -> &'static str {
        "live"
    }
}

/// Offline client backed by a JSON file mapping search strings to hit
/// lists. Keys are normalized at load, so one entry answers every
/// spelling that normalizes the same way; unlisted names return no
/// hits, the same as a fruitless live search.
pub struct FixtureWikidata {
    entries: HashMap<String, Vec<WikidataHit>>,
}

impl FixtureWikidata {
    pub fn from_path(path: &Path) -> Result<Self, EnrichError> {
        let content = std::fs::read_to_string(path)?;
        let raw: HashMap<String, Vec<WikidataHit>> =
            serde_json::from_str(&content).map_err(|e| EnrichError::Fixture(e.to_string()))?;
        Ok(Self::from_entries(raw))
    }

    pub fn from_entries(raw: HashMap<String, Vec<WikidataHit>>) -> Self {
        let entries = raw
            .into_iter()
            .map(|(k, v)| (normalize_surface(&k), v))
            .collect();
        Self { entries }
    }
}

impl WikidataClient for FixtureWikidata {
    fn search(&self, name: &str) -> Result<Vec<WikidataHit>, EnrichError> {
        Ok(self
            .entries
            .get(&normalize_surface(name))
            .cloned()
            .unwrap_or_default())
    }

    fn kind(&self) -> &'static str {
        "fixture"
    }
}
