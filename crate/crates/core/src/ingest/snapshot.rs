//! Dated feed snapshots: an on-disk store with one file per day, and diffing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{CveId, CveRecord, SnapshotDiff};

/// Every CVE record as captured on one date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub date: NaiveDate,
    pub records: BTreeMap<CveId, CveRecord>,
}

impl Snapshot {
    /// Rejects duplicate ids.
    pub fn new(date: NaiveDate, records: impl IntoIterator<Item = CveRecord>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for r in records {
            let id = r.id().clone();
            if map.insert(id.clone(), r).is_some() {
                return Err(Error::invalid("snapshot", format!("duplicate record {id}")));
            }
        }
        Ok(Snapshot { date, records: map })
    }

    /// Unions records from overlapping feeds; for a repeated id the record
    /// with the later `last_modified` wins, ties going to the later input.
    pub fn merged(date: NaiveDate, records: impl IntoIterator<Item = CveRecord>) -> Self {
        let mut map: BTreeMap<CveId, CveRecord> = BTreeMap::new();
        for r in records {
            match map.get(r.id()) {
                Some(existing) if existing.last_modified() > r.last_modified() => {}
                _ => {
                    map.insert(r.id().clone(), r);
                }
            }
        }
        Snapshot { date, records: map }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &CveId) -> Option<&CveRecord> {
        self.records.get(id)
    }
}

/// Records in `newer` but not `older` are new; records in both that differ in
/// any field are updated. Records dropped from `newer` are ignored.
pub fn diff_snapshots(older: &Snapshot, newer: &Snapshot) -> Result<SnapshotDiff> {
    if older.date >= newer.date {
        return Err(Error::Ordering {
            earlier: older.date,
            later: newer.date,
        });
    }
    let mut new_cves = Vec::new();
    let mut updated_cves = Vec::new();
    for (id, after) in &newer.records {
        match older.records.get(id) {
            None => new_cves.push(after.clone()),
            Some(before) if before != after => updated_cves.push((before.clone(), after.clone())),
            Some(_) => {}
        }
    }
    Ok(SnapshotDiff {
        date_from: older.date,
        date_to: newer.date,
        new_cves,
        updated_cves,
    })
}

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    date: NaiveDate,
    sha256: String,
    records: Vec<CveRecord>,
}

fn records_digest(records: &[CveRecord]) -> String {
    let bytes = serde_json::to_vec(records).expect("records serialize");
    let digest = Sha256::digest(&bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Directory of snapshot files at `<root>/snapshots/YYYY-MM-DD`.
#[derive(Debug, Clone)]
pub struct SnapshotStore {
    root: PathBuf,
}

impl SnapshotStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let dir = root.join("snapshots");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(SnapshotStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, date: NaiveDate) -> PathBuf {
        self.root
            .join("snapshots")
            .join(date.format("%Y-%m-%d").to_string())
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.path_for(date).is_file()
    }

    pub fn store(&self, snapshot: &Snapshot, overwrite: bool) -> Result<PathBuf> {
        let path = self.path_for(snapshot.date);
        if path.exists() && !overwrite {
            return Err(Error::SnapshotExists(snapshot.date));
        }
        let records: Vec<CveRecord> = snapshot.records.values().cloned().collect();
        let file = SnapshotFile {
            date: snapshot.date,
            sha256: records_digest(&records),
            records,
        };
        let body = serde_json::to_vec_pretty(&file).expect("snapshot serializes");
        let tmp = path.with_extension("tmp");
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&body)?;
            f.write_all(b"\n")?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        };
        write().map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn load(&self, date: NaiveDate) -> Result<Snapshot> {
        let path = self.path_for(date);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::SnapshotNotFound(date))
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        let integrity = |detail: String| Error::Integrity {
            path: path.clone(),
            detail,
        };
        let file: SnapshotFile =
            serde_json::from_slice(&bytes).map_err(|e| integrity(e.to_string()))?;
        if file.date != date {
            return Err(integrity(format!("file holds date {}", file.date)));
        }
        if records_digest(&file.records) != file.sha256 {
            return Err(integrity("checksum mismatch".to_string()));
        }
        Snapshot::new(date, file.records).map_err(|e| integrity(e.to_string()))
    }

    /// Stored dates in ascending order. Files not named like a date are ignored.
    pub fn dates(&self) -> Result<Vec<NaiveDate>> {
        let dir = self.root.join("snapshots");
        let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut dates = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            if !entry.path().is_file() {
                continue;
            }
            if let Some(date) = entry
                .file_name()
                .to_str()
                .and_then(|n| NaiveDate::parse_from_str(n, "%Y-%m-%d").ok())
            {
                dates.push(date);
            }
        }
        dates.sort();
        Ok(dates)
    }

    /// Nearest stored date strictly before `date`.
    pub fn previous_date(&self, date: NaiveDate) -> Result<Option<NaiveDate>> {
        Ok(self.dates()?.into_iter().rfind(|d| *d < date))
    }
}
