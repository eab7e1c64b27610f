//! Language-model clients: a deterministic offline mock and a generic
//! HTTP client with retries and rate limiting.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::EnrichError;

/// Completion interface the enrichment pipeline talks to.
pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &str, max_tokens: usize, temperature: f32) -> Result<String, EnrichError>;

    /// Short provider label for run manifests.
    fn kind(&self) -> &'static str;
}

/// Deterministic offline client: a pure function of the prompt. It
/// keys on the template markers and answers from the field lines, so
/// enrichment runs bit-identically with no network.
///
/// Responses by step: rewrite requests echo "ENRICHED: " plus the
/// title; entity requests list the title's capitalized runs (adjacent
/// capitalized words form one name) one per line; refine requests
/// echo "REFINED: " plus the candidate and the entity list in
/// brackets. Unrecognized prompts get an empty response, which
/// exercises the caller's documented fallbacks.
#[derive(Debug, Default, Clone, Copy)]
pub struct MockLlm;

fn field_line<'a>(prompt: &'a str, field: &str) -> Option<&'a str> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix(field))
        .map(str::trim)
}

/// Capitalized runs of a title: maximal sequences of words whose
/// first alphabetic character is uppercase, edge punctuation trimmed.
fn capitalized_runs(title: &str) -> Vec<String> {
    let mut runs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for raw in title.split_whitespace() {
        let word = raw.trim_matches(|c: char| !c.is_alphanumeric());
        let capitalized = word.chars().next().is_some_and(char::is_uppercase);
        if capitalized {
            current.push(word);
        } else if !current.is_empty() {
            runs.push(current.join(" "));
            current.clear();
        }
    }
    if !current.is_empty() {
        runs.push(current.join(" "));
    }
    runs
}

impl LlmClient for MockLlm {
    fn complete(&self, prompt: &str, _max_tokens: usize, _temperature: f32) -> Result<String, EnrichError> {
        if prompt.contains("Rewrite the headline") {
            let title = field_line(prompt, "Title:").unwrap_or("");
            return Ok(format!("ENRICHED: {title}"));
        }
        if prompt.contains("one per line") {
            let title = field_line(prompt, "Title:").unwrap_or("");
            return Ok(capitalized_runs(title).join("\n"));
        }
        if prompt.contains("Refine") {
            let candidate = field_line(prompt, "Candidate:").unwrap_or("");
            let entities = field_line(prompt, "Entities:").unwrap_or("");
            return Ok(format!("REFINED: {candidate} [{entities}]"));
        }
        Ok(String::new())
    }

    fn kind(&self) -> &'static str {
        "mock"
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: usize,
    temperature: f32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    completion: String,
}

/// Blocking HTTP client for a completion endpoint accepting
/// `{"prompt", "max_tokens", "temperature"}` and answering
/// `{"completion"}`. Authentication is a bearer token read from the
/// `NEWSREC_LLM_API_KEY` environment variable; the key is never read
/// from configuration files. Transport errors, non-success statuses
/// and empty completions are retried with exponential backoff up to
/// `max_retries` extra attempts, and calls are spaced to respect a
/// client-side requests-per-minute budget.
pub struct HttpLlm {
    endpoint: String,
    api_key: Option<String>,
    max_retries: u32,
    min_interval: Duration,
    last_call: Mutex<Option<Instant>>,
    client: reqwest::blocking::Client,
}

impl HttpLlm {
    pub const API_KEY_ENV: &'static str = "NEWSREC_LLM_API_KEY";

    pub fn new(endpoint: &str, requests_per_minute: u32, max_retries: u32) -> Self {
        let min_interval = if requests_per_minute == 0 {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(60.0 / f64::from(requests_per_minute))
        };
        Self {
            endpoint: endpoint.to_string(),
            api_key: std::env::var(Self::API_KEY_ENV).ok(),
            max_retries,
            min_interval,
            last_call: Mutex::new(None),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(60))
                .build()
                .expect("client construction is infallible with these options"),
        }
    }

    fn wait_for_slot(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        let mut last = self.last_call.lock().expect("rate limiter poisoned");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                std::thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn try_once(&self, prompt: &str, max_tokens: usize, temperature: f32) -> Result<String, EnrichError> {
        self.wait_for_slot();
        let mut req = self.client.post(&self.endpoint).json(&CompletionRequest {
            prompt,
            max_tokens,
            temperature,
        });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| EnrichError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(EnrichError::Transport(format!("status {status}")));
        }
        let body: CompletionResponse = resp.json().map_err(|e| EnrichError::Transport(e.to_string()))?;
        if body.completion.trim().is_empty() {
            return Err(EnrichError::EmptyResponse);
        }
        Ok(body.completion)
    }
}

impl LlmClient for HttpLlm {
    fn complete(&self, prompt: &str, max_tokens: usize, temperature: f32) -> Result<String, EnrichError> {
        let mut last_err = EnrichError::EmptyResponse;
        for attempt in 0..=self.max_retries {
            match self.try_once(prompt, max_tokens, temperature) {
                Ok(r) => return Ok(r),
                Err(e) => {
                    log::warn!("completion attempt {} failed: {e}", attempt + 1);
                    last_err = e;
                }
            }
            if attempt < self.max_retries {
                std::thread::sleep(Duration::from_millis(250) * 2u32.pow(attempt));
            }
        }
        Err(last_err)
    }

    fn kind(&self) -> &'static str {
        "http"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::NewsRecord;
    use crate::enrich::prompts;

    fn sample(title: &str) -> NewsRecord {
        NewsRecord {
            news_id: "N1".into(),
            category: "news".into(),
            subcategory: "world".into(),
            title: title.into(),
            abstract_text: "Some context.".into(),
            title_entities: vec![],
        }
    }

    #[test]
    fn mock_rewrites_with_prefix() {
        let out = MockLlm
            .complete(&prompts::direct_prompt_text(&sample("Rain ends the drought")), 64, 0.0)
            .unwrap();
        assert_eq!(out, "ENRICHED: Rain ends the drought");
    }

    #[test]
    fn mock_extracts_capitalized_tokens() {
        let out = MockLlm
            .complete(&prompts::explore_prompt_text(&sample("A visits B")), 64, 0.0)
            .unwrap();
        assert_eq!(out, "A\nB");
    }

    #[test]
    fn mock_merges_adjacent_capitalized_words() {
        let out = MockLlm
            .complete(
                &prompts::explore_prompt_text(&sample("U.S. and United States sign pact")),
                64,
                0.0,
            )
            .unwrap();
        assert_eq!(out, "U.S\nUnited States");
    }

    #[test]
    fn mock_refines_with_entity_bracket() {
        let news = sample("Original");
        let p = prompts::refine_prompt_text(&news, "Candidate title", &["Alpha", "Beta"]);
        let out = MockLlm.complete(&p, 64, 0.0).unwrap();
        assert_eq!(out, "REFINED: Candidate title [Alpha, Beta]");
    }

    #[test]
    fn mock_is_pure() {
        let p = prompts::direct_prompt_text(&sample("Same title"));
        assert_eq!(
            MockLlm.complete(&p, 64, 0.0).unwrap(),
            MockLlm.complete(&p, 999, 1.0).unwrap()
        );
    }

    #[test]
    fn mock_returns_empty_for_unknown_prompt() {
        assert_eq!(MockLlm.complete("who are you", 64, 0.0).unwrap(), "");
    }
}
