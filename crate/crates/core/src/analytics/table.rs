use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CvssScore, SeverityLevel};

/// Row order of the score table.
pub const TABLE_LEVELS: [SeverityLevel; 4] = [
    SeverityLevel::Critical,
    SeverityLevel::High,
    SeverityLevel::Medium,
    SeverityLevel::Low,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCell {
    pub count: u64,
    /// Whole percent of the column total, rounded half up.
    pub pct: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub level: SeverityLevel,
    pub initially_scored: TableCell,
    pub later_scored: TableCell,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
    pub total_initially_scored: u64,
    pub total_later_scored: u64,
}

/// `count / total` as whole percent, half rounded up; 0 for an empty column.
pub fn round_pct(count: u64, total: u64) -> u64 {
    if total == 0 {
        0
    } else {
        (200 * count + total) / (2 * total)
    }
}

fn column_counts(scores: &[CvssScore]) -> Result<[u64; 4]> {
    let mut counts = [0u64; 4];
    for score in scores {
        let level = score.severity();
        let row = TABLE_LEVELS
            .iter()
            .position(|l| *l == level)
            .ok_or_else(|| Error::Domain(format!("score {score} is outside the table levels")))?;
        counts[row] += 1;
    }
    Ok(counts)
}

/// Cross-tabulates scored CVEs by severity level and by whether the score was
/// present in the first report. A 0.0 score is a domain error.
pub fn score_table(
    initially_scored: &[CvssScore],
    later_scored: &[CvssScore],
) -> Result<ScoreTable> {
    Ok(ScoreTable::from_counts(
        column_counts(initially_scored)?,
        column_counts(later_scored)?,
    ))
}

impl ScoreTable {
    /// Builds the table from per-level counts in [`TABLE_LEVELS`] order.
    pub fn from_counts(initial: [u64; 4], later: [u64; 4]) -> Self {
        let total_initial: u64 = initial.iter().sum();
        let total_later: u64 = later.iter().sum();
        let rows = TABLE_LEVELS
            .iter()
            .enumerate()
            .map(|(i, &level)| ScoreRow {
                level,
                initially_scored: TableCell {
                    count: initial[i],
                    pct: round_pct(initial[i], total_initial),
                },
                later_scored: TableCell {
                    count: later[i],
                    pct: round_pct(later[i], total_later),
                },
            })
            .collect();
        ScoreTable {
            rows,
            total_initially_scored: total_initial,
            total_later_scored: total_later,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "level,initially_scored,initially_scored_pct,later_scored,later_scored_pct\n",
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.level,
                row.initially_scored.count,
                row.initially_scored.pct,
                row.later_scored.count,
                row.later_scored.pct
            ));
        }
        out
    }
}
