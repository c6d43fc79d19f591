//! Feed-completeness statistics: severity buckets, per-day missing-field
//! counts, time-to-completion, vendor rankings, the score table and the
//! rank-sum test.

mod history;
mod ranktest;
mod table;

pub use history::{
    completion_delays, daily_completeness, score_groups, vendor_completeness, vendor_observations,
    CompletionDelay, DailyCompleteness, DelayReport, ScoreGroups, TrackedField, VendorObservation,
    VendorStats,
};
pub use ranktest::{
    mann_whitney_u, mann_whitney_u_with, MethodChoice, RankMethod, RankTestResult,
    EXACT_MAX_PRODUCT,
};
pub use table::{round_pct, score_table, ScoreRow, ScoreTable, TableCell, TABLE_LEVELS};

use crate::error::{Error, Result};
use crate::model::SeverityLevel;

/// Qualitative CVSS v3 severity of a base score; an absent score is `Unscored`.
pub fn severity_bucket(score: Option<f64>) -> Result<SeverityLevel> {
    let Some(s) = score else {
        return Ok(SeverityLevel::Unscored);
    };
    if !(0.0..=10.0).contains(&s) {
        return Err(Error::Domain(format!("score {s} outside [0.0, 10.0]")));
    }
    Ok(if s == 0.0 {
        SeverityLevel::None
    } else if s < 4.0 {
        SeverityLevel::Low
    } else if s < 7.0 {
        SeverityLevel::Medium
    } else if s < 9.0 {
        SeverityLevel::High
    } else {
        SeverityLevel::Critical
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CvssScore;
    use proptest::prelude::*;

    #[test]
    fn bucket_boundaries() {
        let cases = [
            (0.0, SeverityLevel::None),
            (0.1, SeverityLevel::Low),
            (3.9, SeverityLevel::Low),
            (4.0, SeverityLevel::Medium),
            (6.9, SeverityLevel::Medium),
            (7.0, SeverityLevel::High),
            (8.9, SeverityLevel::High),
            (9.0, SeverityLevel::Critical),
            (10.0, SeverityLevel::Critical),
        ];
        for (score, level) in cases {
            assert_eq!(severity_bucket(Some(score)).unwrap(), level, "{score}");
        }
        assert_eq!(severity_bucket(None).unwrap(), SeverityLevel::Unscored);
        assert!(severity_bucket(Some(10.1)).is_err());
        assert!(severity_bucket(Some(-0.1)).is_err());
        assert!(severity_bucket(Some(f64::NAN)).is_err());
    }

    #[test]
    fn agrees_with_exact_score_severity() {
        for t in 0..=100u8 {
            let score = CvssScore::from_tenths(t).unwrap();
            assert_eq!(
                severity_bucket(Some(score.as_f64())).unwrap(),
                score.severity()
            );
        }
    }

    proptest! {
        #[test]
        fn bucket_is_monotone(a in 0.0f64..=10.0, b in 0.0f64..=10.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let rank = |s| severity_bucket(Some(s)).unwrap().scale_rank().unwrap();
            prop_assert!(rank(lo) <= rank(hi));
        }
    }
}
