//! Tab-separated corpus readers and writers.
//!
//! The news and behavior formats are fixed-column TSV with no quoting,
//! so cells are split on raw tabs; JSON lives inside single cells and
//! never contains literal tabs or newlines once serialized. Damaged
//! rows are dropped and counted, never silently repaired.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, EnrichedEntity, EnrichedNews, EntityMention, Impression, NewsRecord};

/// Counters from one news file parse.
#[derive(Debug, Default, Clone, Serialize)]
pub struct NewsIngestStats {
    pub rows_read: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub entity_warnings: usize,
}

/// Counters from one behavior file parse.
#[derive(Debug, Default, Clone, Serialize)]
pub struct BehaviorIngestStats {
    pub rows_read: usize,
    pub accepted: usize,
    pub rejected: usize,
}

/// Counters from one enriched-corpus file parse.
#[derive(Debug, Default, Clone, Serialize)]
pub struct EnrichedIngestStats {
    pub rows_read: usize,
    pub accepted: usize,
    pub duplicate_entity_warnings: usize,
}

/// On-disk shape of one entity inside the news file's JSON cells.
#[derive(Serialize, Deserialize)]
struct EntityCell {
    #[serde(rename = "Label")]
    label: String,
    #[serde(rename = "WikidataId", default)]
    wikidata_id: String,
    #[serde(rename = "Confidence", default = "confidence_default")]
    confidence: f64,
}

fn confidence_default() -> f64 {
    1.0
}

fn parse_entity_cell(cell: &str) -> Result<Vec<EntityMention>, serde_json::Error> {
    if cell.trim().is_empty() {
        return Ok(Vec::new());
    }
    let cells: Vec<EntityCell> = serde_json::from_str(cell)?;
    Ok(cells
        .into_iter()
        .map(|c| EntityMention {
            name: c.label,
            wikidata_id: c.wikidata_id,
            confidence: c.confidence,
        })
        .collect())
}

fn entity_cell_json(entities: &[EntityMention]) -> String {
    let cells: Vec<EntityCell> = entities
        .iter()
        .map(|e| EntityCell {
            label: e.name.clone(),
            wikidata_id: e.wikidata_id.clone(),
            confidence: e.confidence,
        })
        .collect();
    serde_json::to_string(&cells).expect("entity cells always serialize")
}

/// Replaces the two characters that would break a TSV cell.
fn sanitize_cell(s: &str) -> String {
    if s.contains(['\t', '\n', '\r']) {
        s.replace(['\t', '\n', '\r'], " ")
    } else {
        s.to_string()
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>, DataError> {
    let content = std::fs::read_to_string(path)?;
    Ok(content
        .lines()
        .map(|l| l.trim_end_matches('\r').to_string())
        .collect())
}

/// Parses a news corpus file of 8 tab-separated columns: id, category,
/// subcategory, title, abstract, url, title entities (JSON), abstract
/// entities (JSON). Rows with the wrong column count, an empty or
/// duplicate id, or an empty title are rejected and counted. Malformed
/// entity JSON degrades to an empty entity list with a warning count.
pub fn parse_news_tsv(path: &Path) -> Result<(Vec<NewsRecord>, NewsIngestStats), DataError> {
    let mut stats = NewsIngestStats::default();
    let mut records = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for line in read_lines(path)? {
        if line.is_empty() {
            continue;
        }
        stats.rows_read += 1;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 8 {
            stats.rejected += 1;
            continue;
        }
        let news_id = cols[0].trim();
        let title = cols[3].trim();
        if news_id.is_empty() || title.is_empty() || seen.contains(news_id) {
            stats.rejected += 1;
            continue;
        }
        let title_entities = match parse_entity_cell(cols[6]) {
            Ok(e) => e,
            Err(_) => {
                stats.entity_warnings += 1;
                Vec::new()
            }
        };
        seen.insert(news_id.to_string());
        records.push(NewsRecord {
            news_id: news_id.to_string(),
            category: cols[1].to_string(),
            subcategory: cols[2].to_string(),
            title: title.to_string(),
            abstract_text: cols[4].to_string(),
            title_entities,
        });
        stats.accepted += 1;
    }
    Ok((records, stats))
}

/// Writes records in the same 8-column layout `parse_news_tsv` reads.
/// The url and abstract-entity columns, which are not retained in
/// memory, are written empty.
pub fn write_news_tsv(path: &Path, records: &[NewsRecord]) -> Result<(), DataError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t\t{}\t[]\n",
            sanitize_cell(&r.news_id),
            sanitize_cell(&r.category),
            sanitize_cell(&r.subcategory),
            sanitize_cell(&r.title),
            sanitize_cell(&r.abstract_text),
            entity_cell_json(&r.title_entities),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parses a behavior log of 5 tab-separated columns: impression id,
/// user id, time, space-separated click history (may be empty), and
/// space-separated "NewsID-Label" candidates. Any malformed candidate
/// or an empty candidate list rejects the whole impression.
pub fn parse_behaviors_tsv(path: &Path) -> Result<(Vec<Impression>, BehaviorIngestStats), DataError> {
    let mut stats = BehaviorIngestStats::default();
    let mut impressions = Vec::new();
    for line in read_lines(path)? {
        if line.is_empty() {
            continue;
        }
        stats.rows_read += 1;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            stats.rejected += 1;
            continue;
        }
        let history: Vec<String> = cols[3].split_whitespace().map(str::to_string).collect();
        let mut candidates = Vec::new();
        let mut bad = cols[0].trim().is_empty();
        for token in cols[4].split_whitespace() {
            match token.rsplit_once('-') {
                Some((id, label)) if !id.is_empty() && (label == "0" || label == "1") => {
                    candidates.push((id.to_string(), if label == "1" { 1 } else { 0 }));
                }
                _ => {
                    bad = true;
                    break;
                }
            }
        }
        if bad || candidates.is_empty() {
            stats.rejected += 1;
            continue;
        }
        impressions.push(Impression {
            impression_id: cols[0].to_string(),
            user_id: cols[1].to_string(),
            timestamp: cols[2].to_string(),
            history,
            candidates,
        });
        stats.accepted += 1;
    }
    Ok((impressions, stats))
}

/// Writes impressions in the layout `parse_behaviors_tsv` reads.
pub fn write_behaviors_tsv(path: &Path, impressions: &[Impression]) -> Result<(), DataError> {
    let mut out = String::new();
    for imp in impressions {
        let cands: Vec<String> = imp
            .candidates
            .iter()
            .map(|(id, label)| format!("{}-{}", sanitize_cell(id), label))
            .collect();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            sanitize_cell(&imp.impression_id),
            sanitize_cell(&imp.user_id),
            sanitize_cell(&imp.timestamp),
            imp.history.iter().map(|h| sanitize_cell(h)).collect::<Vec<_>>().join(" "),
            cands.join(" "),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

const ENRICHED_HEADER: &str = "NewsID\tEnrichedTitle\tEnrichedEntities\tPromptVersion";

/// Parses the enriched-corpus hand-off file: a header line, then rows
/// of article id, rewritten title, entity JSON array, and prompt
/// version. A wrong header or damaged row is fatal because this file
/// is produced by this toolchain and damage means a broken hand-off.
/// A duplicated entity QID inside one row keeps the first occurrence
/// and counts a warning.
pub fn parse_enriched_tsv(path: &Path) -> Result<(Vec<EnrichedNews>, EnrichedIngestStats), DataError> {
    let lines = read_lines(path)?;
    let path_str = path.display().to_string();
    if lines.first().map(String::as_str) != Some(ENRICHED_HEADER) {
        return Err(DataError::Format {
            path: path_str,
            line: 1,
            message: format!("expected header {ENRICHED_HEADER:?}"),
        });
    }
    let mut stats = EnrichedIngestStats::default();
    let mut records = Vec::new();
    for (ix, line) in lines.iter().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        stats.rows_read += 1;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(DataError::Format {
                path: path_str.clone(),
                line: ix + 1,
                message: format!("expected 4 columns, found {}", cols.len()),
            });
        }
        let parsed: Vec<EnrichedEntity> = serde_json::from_str(cols[2]).map_err(|e| DataError::Format {
            path: path_str.clone(),
            line: ix + 1,
            message: format!("entity JSON: {e}"),
        })?;
        let mut seen = HashSet::new();
        let mut enriched_entities = Vec::new();
        for ent in parsed {
            if seen.insert(ent.qid.clone()) {
                enriched_entities.push(ent);
            } else {
                stats.duplicate_entity_warnings += 1;
            }
        }
        records.push(EnrichedNews {
            news_id: cols[0].to_string(),
            enriched_title: cols[1].to_string(),
            enriched_entities,
            prompt_version: cols[3].to_string(),
        });
        stats.accepted += 1;
    }
    Ok((records, stats))
}

/// Writes the enriched-corpus hand-off file with its header.
pub fn write_enriched_tsv(path: &Path, records: &[EnrichedNews]) -> Result<(), DataError> {
    let mut out = String::from(ENRICHED_HEADER);
    out.push('\n');
    for r in records {
        let json = serde_json::to_string(&r.enriched_entities).expect("entities always serialize");
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            sanitize_cell(&r.news_id),
            sanitize_cell(&r.enriched_title),
            json,
            sanitize_cell(&r.prompt_version),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}
