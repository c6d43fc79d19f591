//! Wilcoxon-Mann-Whitney rank-sum test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest `n1 * n2` for which untied samples get the exact distribution.
pub const EXACT_MAX_PRODUCT: usize = 400;

/// Exact counts are held in `u128`; beyond this combined size they could overflow.
const EXACT_MAX_TOTAL: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RankMethod {
    Exact,
    NormalApprox,
}

/// Method selection for [`mann_whitney_u_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MethodChoice {
    /// Exact when `n1 * n2 <= 400` and there are no ties, else normal.
    #[default]
    Auto,
    Force(RankMethod),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTestResult {
    /// U for the first sample.
    pub u_statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: RankMethod,
    pub n1: usize,
    pub n2: usize,
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<RankTestResult> {
    mann_whitney_u_with(a, b, MethodChoice::Auto)
}

pub fn mann_whitney_u_with(a: &[f64], b: &[f64], choice: MethodChoice) -> Result<RankTestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain(
            "rank test needs two non-empty samples".into(),
        ));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::Domain("rank test sample contains NaN".into()));
    }
    let (n1, n2) = (a.len(), b.len());
    let ranked = midranks(a, b);
    let rank_sum_a: f64 = ranked.ranks[..n1].iter().sum();
    let u = rank_sum_a - (n1 * (n1 + 1)) as f64 / 2.0;
    let tied = ranked.tie_term > 0.0;

    let method = match choice {
        MethodChoice::Auto if n1 * n2 <= EXACT_MAX_PRODUCT && !tied => RankMethod::Exact,
        MethodChoice::Auto => RankMethod::NormalApprox,
        MethodChoice::Force(m) => m,
    };
    let p_value = match method {
        RankMethod::Exact => {
            if tied {
                return Err(Error::Domain(
                    "exact rank test requires untied samples".into(),
                ));
            }
            if n1 + n2 > EXACT_MAX_TOTAL {
                return Err(Error::Domain(format!(
                    "exact rank test limited to {EXACT_MAX_TOTAL} observations"
                )));
            }
            exact_p(n1, n2, u.round() as usize)
        }
        RankMethod::NormalApprox => normal_p(n1, n2, u, ranked.tie_term),
    };
    Ok(RankTestResult {
        u_statistic: u,
        p_value,
        method,
        n1,
        n2,
    })
}

struct Ranked {
    ranks: Vec<f64>,
    /// Sum of t^3 - t over tie groups.
    tie_term: f64,
}

/// Midranks of the pooled sample, `a` first then `b`.
fn midranks(a: &[f64], b: &[f64]) -> Ranked {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        let t = (end - start) as f64;
        tie_term += t * t * t - t;
        start = end;
    }
    Ranked { ranks, tie_term }
}

/// Number of arrangements giving each U value, for sample sizes (m, n).
/// Built with f(m, n, u) = f(m - 1, n, u - n) + f(m, n - 1, u).
pub(crate) fn u_distribution(m: usize, n: usize) -> Vec<u128> {
    // prev[j] holds the distribution for (i - 1, j).
    let mut prev: Vec<Vec<u128>> = (0..=n).map(|_| vec![1u128]).collect();
    for i in 1..=m {
        let mut cur: Vec<Vec<u128>> = Vec::with_capacity(n + 1);
        cur.push(vec![1u128]);
        for j in 1..=n {
            let mut dist = vec![0u128; i * j + 1];
            for (u, c) in prev[j].iter().enumerate() {
                dist[u + j] += c;
            }
            for (u, c) in cur[j - 1].iter().enumerate() {
                dist[u] += c;
            }
            cur.push(dist);
        }
        prev = cur;
    }
    prev.swap_remove(n)
}

fn exact_p(n1: usize, n2: usize, u: usize) -> f64 {
    let dist = u_distribution(n1, n2);
    let total: u128 = dist.iter().sum();
    let at_most: u128 = dist[..=u].iter().sum();
    let at_least: u128 = dist[u..].iter().sum();
    let tail = 2 * at_most.min(at_least);
    if tail >= total {
        1.0
    } else {
        tail as f64 / total as f64
    }
}

fn normal_p(n1: usize, n2: usize, u: f64, tie_term: f64) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let n = n1f + n2f;
    let mean = n1f * n2f / 2.0;
    let variance = if n > 1.0 {
        n1f * n2f / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    } else {
        0.0
    };
    if variance <= 0.0 {
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    let standard = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * standard.sf(z)).min(1.0)
}
