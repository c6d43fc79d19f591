//! Completeness statistics over an ordered history of daily snapshots.
//!
//! The first snapshot of a history is a baseline: CVEs already present in it
//! have an unknown first report, so per-CVE statistics only cover CVEs that
//! first appear in a later snapshot.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{diff_snapshots, Snapshot};
use crate::model::{CveId, CveRecord, CvssScore};
use crate::normalize::Normalizer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyCompleteness {
    pub date: NaiveDate,
    pub total_reports: usize,
    pub missing_cvss: usize,
    pub missing_cpe: usize,
    pub missing_mitigation: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TrackedField {
    Cvss,
    Cpe,
}

impl TrackedField {
    pub fn present(self, record: &CveRecord) -> bool {
        match self {
            TrackedField::Cvss => record.cvss3_base().is_some(),
            TrackedField::Cpe => !record.cpe_list().is_empty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionDelay {
    pub cve_id: CveId,
    pub published: NaiveDate,
    pub completed: NaiveDate,
    pub field: TrackedField,
    pub days: i64,
}

/// Every initially-incomplete CVE lands in exactly one of the three buckets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayReport {
    pub field: TrackedField,
    pub delays: Vec<CompletionDelay>,
    pub completed: usize,
    /// Changed after first appearance, but never gained the field.
    pub updated_no_field: usize,
    /// Never changed after first appearance.
    pub never: usize,
}

fn check_order(snapshots: &[Snapshot]) -> Result<()> {
    for pair in snapshots.windows(2) {
        if pair[0].date >= pair[1].date {
            return Err(Error::Ordering {
                earlier: pair[0].date,
                later: pair[1].date,
            });
        }
    }
    Ok(())
}

pub fn daily_completeness(snapshots: &[Snapshot]) -> Result<Vec<DailyCompleteness>> {
    check_order(snapshots)?;
    snapshots
        .windows(2)
        .map(|pair| {
            let diff = diff_snapshots(&pair[0], &pair[1])?;
            let count =
                |pred: fn(&CveRecord) -> bool| diff.new_cves.iter().filter(|r| pred(r)).count();
            Ok(DailyCompleteness {
                date: pair[1].date,
                total_reports: diff.new_cves.len(),
                missing_cvss: count(|r| r.cvss3_base().is_none()),
                missing_cpe: count(|r| r.cpe_list().is_empty()),
                missing_mitigation: count(|r| !r.has_mitigation()),
            })
        })
        .collect()
}

/// Each CVE that first appears after the baseline, with the index of the
/// snapshot it first appeared in.
fn first_appearances(snapshots: &[Snapshot]) -> Vec<(usize, &CveRecord)> {
    let Some(baseline) = snapshots.first() else {
        return Vec::new();
    };
    let mut seen: HashSet<&CveId> = baseline.records.keys().collect();
    let mut out = Vec::new();
    for (i, snap) in snapshots.iter().enumerate().skip(1) {
        for (id, record) in &snap.records {
            if seen.insert(id) {
                out.push((i, record));
            }
        }
    }
    out
}

pub fn completion_delays(snapshots: &[Snapshot], field: TrackedField) -> Result<DelayReport> {
    check_order(snapshots)?;
    let mut report = DelayReport {
        field,
        delays: Vec::new(),
        completed: 0,
        updated_no_field: 0,
        never: 0,
    };
    for (first, initial) in first_appearances(snapshots) {
        if field.present(initial) {
            continue;
        }
        let mut changed = false;
        let mut completion = None;
        for snap in &snapshots[first + 1..] {
            let Some(later) = snap.get(initial.id()) else {
                continue;
            };
            if field.present(later) {
                completion = Some(snap.date);
                break;
            }
            changed |= later != initial;
        }
        match completion {
            Some(completed) => {
                let days = (completed - initial.published()).num_days();
                if days < 0 {
                    return Err(Error::Domain(format!(
                        "{} completed on {completed}, before its publication {}",
                        initial.id(),
                        initial.published()
                    )));
                }
                report.completed += 1;
                report.delays.push(CompletionDelay {
                    cve_id: initial.id().clone(),
                    published: initial.published(),
                    completed,
                    field,
                    days,
                });
            }
            None if changed => report.updated_no_field += 1,
            None => report.never += 1,
        }
    }
    report.delays.sort_by(|a, b| a.cve_id.cmp(&b.cve_id));
    Ok(report)
}

/// Per-CVE input to [`vendor_completeness`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VendorObservation {
    pub cve_id: CveId,
    pub vendors: BTreeSet<String>,
    pub initially_unscored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VendorStats {
    pub vendor: String,
    pub total: usize,
    pub initially_unscored: usize,
    pub pct_unscored: f64,
}

/// Builds one observation per post-baseline CVE, taking vendors from the
/// union of its CPE lists across the whole history. CVEs that never get a
/// CPE are counted in the second return value instead.
pub fn vendor_observations(
    snapshots: &[Snapshot],
    normalizer: &Normalizer,
) -> Result<(Vec<VendorObservation>, usize)> {
    check_order(snapshots)?;
    let mut out = Vec::new();
    let mut without_vendor = 0;
    for (first, initial) in first_appearances(snapshots) {
        let mut vendors = BTreeSet::new();
        for snap in &snapshots[first..] {
            if let Some(record) = snap.get(initial.id()) {
                for cpe in record.cpe_list() {
                    let vendor = normalizer.standardize(&cpe.vendor().replace('_', " "));
                    vendors.insert(if vendor.is_empty() {
                        cpe.vendor().to_string()
                    } else {
                        vendor
                    });
                }
            }
        }
        if vendors.is_empty() {
            without_vendor += 1;
        } else {
            out.push(VendorObservation {
                cve_id: initial.id().clone(),
                vendors,
                initially_unscored: initial.cvss3_base().is_none(),
            });
        }
    }
    Ok((out, without_vendor))
}

/// Sorted by `pct_unscored` descending, then vendor name.
pub fn vendor_completeness(observations: &[VendorObservation]) -> Result<Vec<VendorStats>> {
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for obs in observations {
        if obs.vendors.is_empty() {
            return Err(Error::Precondition(format!("{} has no vendor", obs.cve_id)));
        }
        for vendor in &obs.vendors {
            let entry = tally.entry(vendor).or_default();
            entry.0 += 1;
            entry.1 += usize::from(obs.initially_unscored);
        }
    }
    let mut stats: Vec<VendorStats> = tally
        .into_iter()
        .map(|(vendor, (total, unscored))| VendorStats {
            vendor: vendor.to_string(),
            total,
            initially_unscored: unscored,
            pct_unscored: unscored as f64 / total as f64,
        })
        .collect();
    stats.sort_by(|a, b| {
        b.pct_unscored
            .total_cmp(&a.pct_unscored)
            .then_with(|| a.vendor.cmp(&b.vendor))
    });
    Ok(stats)
}

/// Scores of post-baseline CVEs, split by whether the score was in the first
/// report. Later-scored CVEs contribute the first score they received.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScoreGroups {
    pub initially_scored: Vec<CvssScore>,
    pub later_scored: Vec<CvssScore>,
}

pub fn score_groups(snapshots: &[Snapshot]) -> Result<ScoreGroups> {
    check_order(snapshots)?;
    let mut groups = ScoreGroups::default();
    for (first, initial) in first_appearances(snapshots) {
        if let Some(score) = initial.cvss3_base() {
            groups.initially_scored.push(score);
            continue;
        }
        let later = snapshots[first + 1..]
            .iter()
            .filter_map(|s| s.get(initial.id()))
            .find_map(CveRecord::cvss3_base);
        if let Some(score) = later {
            groups.later_scored.push(score);
        }
    }
    Ok(groups)
}
