//! Groups match results into one ticket per (vendor, product name),
//! ignoring versions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::matcher::{AssetIndex, MatchResult};
use crate::model::{CveId, CveRecord, CvssScore, MatchVia, ProductKey, SeverityLevel, Ticket};

#[derive(Default)]
struct Group {
    cves: BTreeMap<CveId, MatchVia>,
    assets: BTreeSet<String>,
}

pub fn group_matches(
    matches: &[MatchResult],
    assets: &AssetIndex,
    cves: &HashMap<CveId, &CveRecord>,
    created: NaiveDate,
) -> Result<Vec<Ticket>> {
    let mut groups: BTreeMap<ProductKey, Group> = BTreeMap::new();
    for m in matches {
        if !cves.contains_key(&m.cve_id) {
            return Err(Error::UnknownReference {
                kind: "CVE",
                id: m.cve_id.to_string(),
            });
        }
        for asset_id in &m.asset_ids {
            let asset = assets
                .get(asset_id)
                .ok_or_else(|| Error::UnknownReference {
                    kind: "asset",
                    id: asset_id.clone(),
                })?;
            let group = groups.entry(asset.wfn.key()).or_default();
            // CPE evidence outranks a summary hit for the same CVE.
            group
                .cves
                .entry(m.cve_id.clone())
                .and_modify(|via| *via = (*via).min(m.via))
                .or_insert(m.via);
            group.assets.insert(asset_id.clone());
        }
    }

    let mut tickets: Vec<Ticket> = groups
        .into_iter()
        .map(|(key, group)| {
            let max_score: Option<CvssScore> = group
                .cves
                .keys()
                .filter_map(|id| cves[id].cvss3_base())
                .max();
            Ticket {
                key,
                cve_ids: group.cves.keys().cloned().collect(),
                matched_assets: group.assets.into_iter().collect(),
                max_severity: max_score.map_or(SeverityLevel::Unscored, CvssScore::severity),
                created,
                via: group.cves,
            }
        })
        .collect();
    tickets.sort_by(|a, b| {
        a.max_severity
            .priority()
            .cmp(&b.max_severity.priority())
            .then_with(|| a.key.cmp(&b.key))
    });
    Ok(tickets)
}

/// Writes one JSON object per line. On a write failure the error carries the
/// number of tickets already written.
pub fn emit_tickets<W: Write>(tickets: &[Ticket], sink: &mut W) -> Result<usize> {
    let mut written = 0;
    for ticket in tickets {
        let line = serde_json::to_string(ticket).expect("ticket serializes");
        sink.write_all(line.as_bytes())
            .and_then(|()| sink.write_all(b"\n"))
            .map_err(|source| Error::Sink { written, source })?;
        written += 1;
    }
    sink.flush()
        .map_err(|source| Error::Sink { written, source })?;
    Ok(written)
}
