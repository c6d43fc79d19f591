//! Helpers for driving the CLI in-process against temporary files.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use sentinel_core::ingest::{Snapshot, SnapshotStore};
use sentinel_core::model::CveRecord;
use serde_json::{json, Value};

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn sentinel(args: &[&str]) -> Outcome {
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let argv = std::iter::once("sentinel").chain(args.iter().copied());
    let code = sentinel_cli::run_from(argv, &mut stdout, &mut stderr);
    Outcome {
        code,
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

pub fn nvd_item(rec: &CveRecord) -> Value {
    let mut item = json!({
        "cve": {
            "CVE_data_meta": { "ID": rec.id().to_string() },
            "references": {
                "reference_data": rec.references().iter().map(|u| json!({ "url": u })).collect::<Vec<_>>()
            },
            "description": { "description_data": [{ "lang": "en", "value": rec.summary() }] }
        },
        "configurations": {
            "nodes": [{
                "operator": "OR",
                "cpe_match": rec.cpe_list().iter()
                    .map(|c| json!({ "vulnerable": true, "cpe23Uri": c.raw() }))
                    .collect::<Vec<_>>()
            }]
        },
        "publishedDate": format!("{}T10:00Z", rec.published()),
        "lastModifiedDate": format!("{}T10:00Z", rec.last_modified()),
    });
    if let Some(score) = rec.cvss3_base() {
        item["impact"] = json!({ "baseMetricV3": { "cvssV3": { "baseScore": score.as_f64() } } });
    }
    item
}

pub fn feed_json(items: Vec<Value>) -> String {
    json!({ "CVE_data_type": "CVE", "CVE_data_format": "MITRE", "CVE_Items": items }).to_string()
}

pub fn write_feed(path: &Path, records: &[CveRecord]) {
    fs::write(path, feed_json(records.iter().map(nvd_item).collect())).unwrap();
}

pub fn write_dictionary(path: &Path, pairs: &[(String, String)]) {
    let entries: Vec<Value> = pairs
        .iter()
        .map(|(v, p)| {
            json!({ "cpe23": format!("cpe:2.3:a:{}:{}:-:*:*:*:*:*:*:*", v.replace(' ', "_"), p.replace(' ', "_")) })
        })
        .collect();
    fs::write(path, Value::Array(entries).to_string()).unwrap();
}

pub fn store_history(root: &Path, history: &[Snapshot]) {
    let store = SnapshotStore::open(root).unwrap();
    for snap in history {
        store.store(snap, false).unwrap();
    }
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn join(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
