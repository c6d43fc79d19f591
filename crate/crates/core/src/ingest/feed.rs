//! NVD JSON 1.1 feed parsing.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use flate2::read::GzDecoder;
use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{CpeUri, CveId, CveRecord, CvssScore};

/// An item that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedItem {
    /// Position in `CVE_Items`.
    pub index: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct FeedParse {
    pub records: Vec<CveRecord>,
    pub rejects: Vec<RejectedItem>,
}

impl FeedParse {
    pub fn item_count(&self) -> usize {
        self.records.len() + self.rejects.len()
    }
}

#[derive(Deserialize)]
struct FeedDoc {
    #[serde(rename = "CVE_Items")]
    items: Vec<Value>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Item {
    cve: Option<CveSection>,
    configurations: Option<Configurations>,
    impact: Option<Impact>,
    published_date: Option<String>,
    last_modified_date: Option<String>,
}

#[derive(Deserialize)]
struct CveSection {
    #[serde(rename = "CVE_data_meta")]
    meta: Option<Meta>,
    references: Option<References>,
    description: Option<Description>,
}

#[derive(Deserialize)]
struct Meta {
    #[serde(rename = "ID")]
    id: Option<String>,
}

#[derive(Deserialize)]
struct References {
    #[serde(default)]
    reference_data: Vec<Reference>,
}

#[derive(Deserialize)]
struct Reference {
    url: Option<String>,
}

#[derive(Deserialize)]
struct Description {
    #[serde(default)]
    description_data: Vec<LangString>,
}

#[derive(Deserialize)]
struct LangString {
    lang: Option<String>,
    value: Option<String>,
}

#[derive(Deserialize)]
struct Configurations {
    #[serde(default)]
    nodes: Vec<Node>,
}

#[derive(Deserialize)]
struct Node {
    #[serde(default)]
    children: Vec<Node>,
    #[serde(default)]
    cpe_match: Vec<CpeMatch>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CpeMatch {
    cpe23_uri: Option<String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Impact {
    base_metric_v3: Option<BaseMetricV3>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct BaseMetricV3 {
    cvss_v3: Option<CvssV3>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CvssV3 {
    base_score: Option<f64>,
}

/// Parses an NVD JSON 1.1 feed. Malformed JSON fails the whole call;
/// individual bad items land in `rejects`.
pub fn parse_feed(bytes: &[u8]) -> Result<FeedParse> {
    let doc: FeedDoc = serde_json::from_slice(bytes).map_err(|e| Error::json(bytes, &e))?;
    let mut out = FeedParse::default();
    for (index, value) in doc.items.into_iter().enumerate() {
        match parse_item(value) {
            Ok(record) => out.records.push(record),
            Err((id, reason)) => out.rejects.push(RejectedItem { index, id, reason }),
        }
    }
    Ok(out)
}

/// Reads a whole file, gunzipping when the name ends in `.gz`.
pub fn read_input_file(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if !path.extension().is_some_and(|ext| ext == "gz") {
        return Ok(raw);
    }
    let mut decoded = Vec::new();
    GzDecoder::new(raw.as_slice())
        .read_to_end(&mut decoded)
        .map_err(|e| Error::io(path, e))?;
    Ok(decoded)
}

pub fn read_feed_file(path: &Path) -> Result<FeedParse> {
    parse_feed(&read_input_file(path)?)
}

fn parse_item(value: Value) -> std::result::Result<CveRecord, (Option<String>, String)> {
    let item: Item = serde_json::from_value(value).map_err(|e| (None, e.to_string()))?;
    let cve = item.cve.ok_or((None, "missing cve section".to_string()))?;
    let raw_id = cve
        .meta
        .and_then(|m| m.id)
        .ok_or((None, "missing CVE_data_meta.ID".to_string()))?;
    let fail = |reason: String| (Some(raw_id.clone()), reason);

    let id = CveId::new(raw_id.clone()).map_err(|e| fail(e.to_string()))?;
    let published = item
        .published_date
        .as_deref()
        .ok_or_else(|| fail("missing publishedDate".to_string()))
        .and_then(|s| parse_day(s).map_err(fail))?;
    let last_modified = match item.last_modified_date.as_deref() {
        Some(s) => parse_day(s).map_err(fail)?,
        None => published,
    };

    let summary = cve
        .description
        .map(|d| d.description_data)
        .unwrap_or_default()
        .into_iter()
        .find(|d| d.lang.as_deref() == Some("en"))
        .and_then(|d| d.value)
        .unwrap_or_default();

    let cvss3_base = item
        .impact
        .and_then(|i| i.base_metric_v3)
        .and_then(|m| m.cvss_v3)
        .and_then(|c| c.base_score)
        .map(CvssScore::from_f64)
        .transpose()
        .map_err(|e| fail(e.to_string()))?;

    let mut cpe_list = Vec::new();
    if let Some(config) = item.configurations {
        collect_cpes(&config.nodes, &mut cpe_list);
    }

    let references = cve
        .references
        .map(|r| r.reference_data)
        .unwrap_or_default()
        .into_iter()
        .filter_map(|r| r.url)
        .collect();

    CveRecord::new(
        id,
        published,
        last_modified,
        summary,
        cvss3_base,
        cpe_list,
        references,
    )
    .map_err(|e| fail(e.to_string()))
}

fn collect_cpes(nodes: &[Node], out: &mut Vec<CpeUri>) {
    for node in nodes {
        for m in &node.cpe_match {
            // Unparseable CPE strings are dropped; the rest of the item is kept.
            if let Some(cpe) = m.cpe23_uri.as_deref().and_then(|s| CpeUri::parse(s).ok()) {
                if !out.contains(&cpe) {
                    out.push(cpe);
                }
            }
        }
        collect_cpes(&node.children, out);
    }
}

/// NVD timestamps look like `2021-06-01T12:15Z`; only the day is kept.
fn parse_day(s: &str) -> std::result::Result<NaiveDate, String> {
    s.get(..10)
        .and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok())
        .ok_or_else(|| format!("unparseable date {s:?}"))
}
