//! Independent oracles and seeded fixtures shared by the integration tests
//! and the CLI acceptance runner.
//!
//! Fixture text sticks to ASCII words, spaces, commas, full stops and
//! hyphens, so the oracle tokenizer below can be a plain character split.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sentinel_core::analytics::RankMethod;
use sentinel_core::ingest::{CpeDictionary, Snapshot};
use sentinel_core::matcher::{MatchResult, FUNCTION_WORDS};
use sentinel_core::model::{
    AssetRecord, CpeUri, CveId, CveRecord, CvssScore, MatchVia, WellFormedName,
};

pub fn day(d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 6, d).unwrap()
}

pub fn cve_id(n: usize) -> CveId {
    CveId::new(format!("CVE-2021-{n:04}")).unwrap()
}

pub fn cpe(vendor: &str, product: &str, version: &str) -> CpeUri {
    CpeUri::parse(&format!(
        "cpe:2.3:a:{}:{}:{}:*:*:*:*:*:*:*",
        vendor.replace(' ', "_"),
        product.replace(' ', "_"),
        version
    ))
    .unwrap()
}

pub fn record(
    id: usize,
    published: NaiveDate,
    summary: &str,
    score: Option<f64>,
    cpes: Vec<CpeUri>,
) -> CveRecord {
    CveRecord::new(
        cve_id(id),
        published,
        published,
        summary,
        score.map(|s| CvssScore::from_f64(s).unwrap()),
        cpes,
        vec![],
    )
    .unwrap()
}

// ---------------------------------------------------------------------------
// Matcher oracle

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub max_phrase_len: usize,
    pub min_name_len: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_phrase_len: 4,
            min_name_len: 3,
        }
    }
}

impl OracleConfig {
    fn eligible(&self, name: &str) -> bool {
        !name.is_empty() && name.chars().count() >= self.min_name_len
    }
}

pub fn oracle_tokens(text: &str) -> Vec<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '+' || c == '#' {
                c
            } else {
                ' '
            }
        })
        .collect();
    cleaned
        .split_whitespace()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .filter(|t| !FUNCTION_WORDS.contains(t))
        .map(str::to_string)
        .collect()
}

/// Whether `name` occurs in `summary` as a run of whole tokens.
pub fn oracle_mentions(summary: &str, name: &str, config: &OracleConfig) -> bool {
    if !config.eligible(name) {
        return false;
    }
    let key = oracle_tokens(name);
    if key.is_empty() || key.len() > config.max_phrase_len {
        return false;
    }
    let haystack = format!(" {} ", oracle_tokens(summary).join(" "));
    haystack.contains(&format!(" {} ", key.join(" ")))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OracleReport {
    pub total: usize,
    pub tp: usize,
    pub tp_both: usize,
    pub fp: usize,
    pub elided_names: usize,
}

fn own_pairs(record: &CveRecord) -> BTreeSet<(String, String)> {
    record
        .cpe_list()
        .iter()
        .map(|c| (c.vendor().replace('_', " "), c.product().replace('_', " ")))
        .collect()
}

/// Every dictionary pair checked against every summary.
pub fn oracle_evaluate(
    corpus: &[CveRecord],
    pairs: &[(String, String)],
    config: &OracleConfig,
) -> OracleReport {
    let vendors: BTreeSet<&str> = pairs.iter().map(|(v, _)| v.as_str()).collect();
    let products: BTreeSet<&str> = pairs.iter().map(|(_, p)| p.as_str()).collect();
    let mut report = OracleReport {
        total: corpus.len(),
        elided_names: vendors.iter().filter(|v| !config.eligible(v)).count()
            + products.iter().filter(|p| !config.eligible(p)).count(),
        ..OracleReport::default()
    };
    for rec in corpus {
        let own = own_pairs(rec);
        let hit = |name: &str| oracle_mentions(rec.summary(), name, config);
        if own.iter().any(|(v, p)| hit(v) || hit(p)) {
            report.tp += 1;
        }
        if own.iter().any(|(v, p)| hit(v) && hit(p)) {
            report.tp_both += 1;
        }
        let fp = pairs
            .iter()
            .any(|(v, p)| hit(v) && hit(p) && !own.contains(&(v.clone(), p.clone())));
        if fp {
            report.fp += 1;
        }
    }
    report
}

/// Names present in a summary but absent from the record's own CPEs.
pub fn oracle_filter(
    corpus: &[CveRecord],
    pairs: &[(String, String)],
    config: &OracleConfig,
) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut vendors = BTreeSet::new();
    let mut products = BTreeSet::new();
    for rec in corpus {
        let own = own_pairs(rec);
        for (v, p) in pairs {
            if oracle_mentions(rec.summary(), v, config) && !own.iter().any(|(ov, _)| ov == v) {
                vendors.insert(v.clone());
            }
            if oracle_mentions(rec.summary(), p, config) && !own.iter().any(|(_, op)| op == p) {
                products.insert(p.clone());
            }
        }
    }
    (vendors, products)
}

// ---------------------------------------------------------------------------
// Matcher fixture

const WORDS: &[&str] = &[
    "orbit", "falcon", "quartz", "nimbus", "harbor", "cobalt", "ember", "glacier", "lumen",
    "vertex", "pioneer", "sable", "tundra", "zephyr", "atlas", "beacon", "cinder", "delta", "echo",
    "fjord", "granite", "helix", "iris", "jasper", "kestrel", "lattice", "mosaic", "nova", "onyx",
    "prism", "quill", "raven", "summit", "tangent", "umber", "vortex", "willow", "yarrow",
    "zenith", "anvil", "bramble", "crest", "drift", "fable", "gully", "hollow",
];

const FILLER: &[&str] = &[
    "allows",
    "remote",
    "attackers",
    "execute",
    "arbitrary",
    "code",
    "crafted",
    "request",
    "buffer",
    "overflow",
    "component",
    "affected",
    "versions",
    "vulnerability",
    "users",
    "cross-site",
    "scripting",
    "denial",
    "service",
    "memory",
    "corruption",
    "authentication",
    "bypass",
    "privilege",
    "escalation",
    "letter",
    "stand",
    "alone",
    "word",
    "value",
    "handling",
];

/// Short names planted among the dictionary entries.
pub const PLANTED_SHORT: &[(&str, &str)] = &[
    ("xorg", "x"),
    ("quartz", "x"),
    ("ab", "nimbus"),
    ("ember", "io"),
    ("q", "q"),
];

/// A record whose only dictionary mention is the planted (xorg, x) pair, so it
/// counts as a false positive only once one-letter names are admitted.
pub fn planted_short_record(id: usize) -> CveRecord {
    record(
        id,
        day(1),
        "The Xorg display server treats the letter X as a stand alone word.",
        None,
        vec![cpe("initech", "tps", "1.0")],
    )
}

pub struct MatcherFixture {
    pub pairs: Vec<(String, String)>,
    pub dictionary: CpeDictionary,
    pub corpus: Vec<CveRecord>,
}

fn random_name(rng: &mut ChaCha8Rng, max_words: usize) -> String {
    let n = rng.gen_range(1..=max_words);
    let mut words: Vec<&str> = WORDS.choose_multiple(rng, n).copied().collect();
    if n >= 2 && rng.gen_bool(0.1) {
        words.insert(1, "of");
    }
    words.join(" ")
}

/// Writes a name the way an advisory might: mixed case, sometimes hyphenated.
fn render_name(rng: &mut ChaCha8Rng, name: &str) -> String {
    let sep = if rng.gen_bool(0.3) { "-" } else { " " };
    name.split(' ')
        .map(|w| {
            if rng.gen_bool(0.5) {
                let mut c = w.chars();
                c.next()
                    .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
                    .unwrap_or_default()
            } else {
                w.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(sep)
}

pub fn matcher_fixture(seed: u64, n_cves: usize, n_entries: usize) -> MatcherFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set: BTreeSet<(String, String)> = PLANTED_SHORT
        .iter()
        .map(|(v, p)| (v.to_string(), p.to_string()))
        .collect();
    let vendors: Vec<String> = (0..n_entries / 4)
        .map(|_| random_name(&mut rng, 2))
        .collect();
    while set.len() < n_entries {
        let vendor = vendors.choose(&mut rng).unwrap().clone();
        let product = random_name(&mut rng, 5);
        if product != vendor {
            set.insert((vendor, product));
        }
    }
    let pairs: Vec<(String, String)> = set.into_iter().collect();
    let dictionary = CpeDictionary::from_entries(
        pairs
            .iter()
            .map(|(v, p)| WellFormedName::new(p.as_str(), v.as_str(), "").unwrap()),
    );

    let mut corpus = Vec::new();
    for i in 0..n_cves {
        let n_own = rng.gen_range(1..=2);
        let own: Vec<&(String, String)> = pairs.choose_multiple(&mut rng, n_own).collect();
        let mut parts: Vec<String> = Vec::new();
        for _ in 0..rng.gen_range(4..12) {
            parts.push(FILLER.choose(&mut rng).unwrap().to_string());
        }
        for (v, p) in &own {
            if rng.gen_bool(0.6) {
                parts.insert(rng.gen_range(0..=parts.len()), render_name(&mut rng, p));
            }
            if rng.gen_bool(0.4) {
                parts.insert(rng.gen_range(0..=parts.len()), render_name(&mut rng, v));
            }
        }
        for _ in 0..rng.gen_range(0..3) {
            let (v, p) = pairs.choose(&mut rng).unwrap();
            let name = if rng.gen_bool(0.5) { v } else { p };
            parts.insert(rng.gen_range(0..=parts.len()), render_name(&mut rng, name));
        }
        if rng.gen_bool(0.2) {
            parts.push("the letter X as a stand alone word".to_string());
        }
        let mut summary = String::new();
        for (j, part) in parts.iter().enumerate() {
            if j > 0 {
                summary.push_str(if rng.gen_bool(0.15) { ", " } else { " " });
            }
            summary.push_str(part);
        }
        summary.push('.');
        let cpes = own.iter().map(|(v, p)| cpe(v, p, "1.0")).collect();
        corpus.push(record(i + 1, day(1), &summary, None, cpes));
    }
    MatcherFixture {
        pairs,
        dictionary,
        corpus,
    }
}

// ---------------------------------------------------------------------------
// Ticket fixture

pub struct TicketFixture {
    pub assets: Vec<AssetRecord>,
    pub cves: Vec<CveRecord>,
    pub matches: Vec<MatchResult>,
}

/// Random assets drawn from a small product pool, with several versions per
/// product, and random matches between them and a set of CVEs.
pub fn ticket_fixture(seed: u64) -> TicketFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let products = ["alpha widget", "gadget", "hive", "nucleus", "widget"];
    let vendors = ["acme", "globex", "hooli"];
    let n_assets = rng.gen_range(1..20);
    let assets: Vec<AssetRecord> = (0..n_assets)
        .map(|i| {
            let name = *products.choose(&mut rng).unwrap();
            let vendor = *vendors.choose(&mut rng).unwrap();
            let version = format!("{}.{}", rng.gen_range(1..4), rng.gen_range(0..3));
            AssetRecord {
                asset_id: format!("A{i:03}"),
                raw_product: name.to_string(),
                raw_vendor: vendor.to_string(),
                raw_version: version.clone(),
                cpe: None,
                wfn: WellFormedName::new(name, vendor, version).unwrap(),
            }
        })
        .collect();
    let n_cves = rng.gen_range(1..15);
    let cves: Vec<CveRecord> = (0..n_cves)
        .map(|i| {
            let score = rng
                .gen_bool(0.7)
                .then(|| rng.gen_range(0..=100) as f64 / 10.0);
            record(i + 1, day(1), "summary", score, vec![])
        })
        .collect();
    let n_matches = rng.gen_range(0..25);
    let matches = (0..n_matches)
        .map(|_| {
            let cve = cves.choose(&mut rng).unwrap();
            let k = rng.gen_range(1..=assets.len().min(4));
            let mut ids: Vec<String> = assets
                .choose_multiple(&mut rng, k)
                .map(|a| a.asset_id.clone())
                .collect();
            ids.sort();
            MatchResult {
                cve_id: cve.id().clone(),
                asset_ids: ids,
                via: if rng.gen_bool(0.5) {
                    MatchVia::Cpe
                } else {
                    MatchVia::Summary
                },
                matched_phrase: None,
            }
        })
        .collect();
    TicketFixture {
        assets,
        cves,
        matches,
    }
}

/// Distinct (vendor, name) keys over all matched assets.
pub fn oracle_ticket_keys(fixture: &TicketFixture) -> BTreeSet<(String, String)> {
    let by_id: HashMap<&str, &AssetRecord> = fixture
        .assets
        .iter()
        .map(|a| (a.asset_id.as_str(), a))
        .collect();
    fixture
        .matches
        .iter()
        .flat_map(|m| m.asset_ids.iter())
        .map(|id| {
            let wfn = &by_id[id.as_str()].wfn;
            (wfn.vendor().to_string(), wfn.name().to_string())
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Rank-test oracles

fn u_of(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for x in a {
        for y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

fn choose_indices(
    n: usize,
    k: usize,
    start: usize,
    cur: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        if n - i < k - cur.len() {
            break;
        }
        cur.push(i);
        choose_indices(n, k, i + 1, cur, out);
        cur.pop();
    }
}

/// Two-sided exact p by relabelling the pooled sample every possible way.
pub fn enumeration_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let observed = u_of(a, b);
    let mut subsets = Vec::new();
    choose_indices(pooled.len(), a.len(), 0, &mut Vec::new(), &mut subsets);
    let (mut le, mut ge) = (0u64, 0u64);
    for subset in &subsets {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, v) in pooled.iter().enumerate() {
            if subset.contains(&i) {
                x.push(*v);
            } else {
                y.push(*v);
            }
        }
        let u = u_of(&x, &y);
        le += u64::from(u <= observed);
        ge += u64::from(u >= observed);
    }
    let total = subsets.len() as f64;
    (2.0 * (le.min(ge) as f64) / total).min(1.0)
}

/// Coefficients of the Gaussian binomial [m+n choose m]_q, which count the
/// arrangements giving each U, built as a product of cyclotomic-style factors.
pub fn qbinomial_counts(m: usize, n: usize) -> Vec<i128> {
    // prod_{i=1..m} (1 - q^{n+i}) / (1 - q^i)
    let mut poly: Vec<i128> = vec![1];
    for i in 1..=m {
        let k = n + i;
        let mut next = vec![0i128; poly.len() + k];
        for (j, c) in poly.iter().enumerate() {
            next[j] += c;
            next[j + k] -= c;
        }
        // Divide by (1 - q^i): running sum with stride i.
        for j in i..next.len() {
            next[j] += next[j - i];
        }
        while next.len() > 1 && *next.last().unwrap() == 0 {
            next.pop();
        }
        poly = next;
    }
    poly
}

pub fn qbinomial_p(n1: usize, n2: usize, u: f64) -> f64 {
    let counts = qbinomial_counts(n1, n2);
    let total: i128 = counts.iter().sum();
    let u = u.round() as usize;
    let le: i128 = counts[..=u.min(counts.len() - 1)].iter().sum();
    let ge: i128 = counts[u.min(counts.len())..].iter().sum();
    (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
}

pub fn untied_sample(rng: &mut ChaCha8Rng, n1: usize, n2: usize) -> (Vec<f64>, Vec<f64>) {
    let mut values: Vec<f64> = (0..(n1 + n2) * 3).map(|i| i as f64 * 0.5 + 0.25).collect();
    values.shuffle(rng);
    values.truncate(n1 + n2);
    let b = values.split_off(n1);
    (values, b)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const NORMAL: RankMethod = RankMethod::NormalApprox;

// ---------------------------------------------------------------------------
// Ten-day analytics history

/// Baseline on day 1 with two CVEs, then nine daily snapshots. Each record is
/// re-issued with the field changes noted on the day they land.
pub fn analytics_history() -> Vec<Snapshot> {
    let refs = |r: CveRecord| r.with_references(vec!["https://example.com/advisory".into()]);
    let score = |s: f64| Some(CvssScore::from_f64(s).unwrap());

    let b1 = refs(record(
        1,
        day(1),
        "baseline one",
        None,
        vec![cpe("acme", "widget", "1.0")],
    ));
    let b2 = refs(record(
        2,
        day(1),
        "baseline two",
        Some(5.5),
        vec![cpe("acme", "widget", "2.0")],
    ));
    let n1 = record(11, day(2), "n1", None, vec![]);
    let n2 = refs(record(
        12,
        day(2),
        "n2",
        Some(9.8),
        vec![cpe("acme", "widget", "1.0"), cpe("hooli", "nucleus", "3")],
    ));
    let n3 = refs(record(
        13,
        day(3),
        "n3",
        None,
        vec![cpe("globex", "gadget", "1.0")],
    ));
    let n4 = record(14, day(4), "n4", Some(5.0), vec![]);
    let n5 = record(15, day(5), "n5", None, vec![cpe("acme", "widget", "1.1")]);
    let n6 = refs(record(
        16,
        day(6),
        "n6",
        Some(3.1),
        vec![cpe("initech", "tps", "1.0")],
    ));
    let n7 = record(17, day(8), "n7", None, vec![cpe("globex", "gadget", "2.0")]);
    let n8 = refs(record(18, day(8), "n8", Some(4.0), vec![]));
    let n9 = refs(record(
        19,
        day(9),
        "n9",
        None,
        vec![cpe("umbrella", "hive", "1.0")],
    ));

    // Later states.
    let b1_scored = b1
        .clone()
        .with_cvss3(score(7.0))
        .with_last_modified(day(3))
        .unwrap();
    let n1_scored = n1
        .clone()
        .with_cvss3(score(7.5))
        .with_last_modified(day(4))
        .unwrap();
    let n1_cpe = n1_scored
        .clone()
        .with_cpe_list(vec![cpe("umbrella", "hive", "2.0")])
        .with_last_modified(day(9))
        .unwrap();
    let n3_refs = n3
        .clone()
        .with_references(vec![
            "https://example.com/n3".into(),
            "https://example.com/n3b".into(),
        ])
        .with_last_modified(day(5))
        .unwrap();
    let n4_cpe = n4
        .clone()
        .with_cpe_list(vec![cpe("initech", "tps", "2.0")])
        .with_last_modified(day(6))
        .unwrap();
    let n5_scored = n5
        .clone()
        .with_cvss3(score(9.1))
        .with_last_modified(day(7))
        .unwrap();
    let n9_scored = n9
        .clone()
        .with_cvss3(score(8.0))
        .with_last_modified(day(10))
        .unwrap();

    let days: Vec<Vec<&CveRecord>> = vec![
        vec![&b1, &b2],
        vec![&b1, &b2, &n1, &n2],
        vec![&b1_scored, &b2, &n1, &n2, &n3],
        vec![&b1_scored, &b2, &n1_scored, &n2, &n3, &n4],
        vec![&b1_scored, &b2, &n1_scored, &n2, &n3_refs, &n4, &n5],
        vec![
            &b1_scored, &b2, &n1_scored, &n2, &n3_refs, &n4_cpe, &n5, &n6,
        ],
        vec![
            &b1_scored, &b2, &n1_scored, &n2, &n3_refs, &n4_cpe, &n5_scored, &n6,
        ],
        vec![
            &b1_scored, &b2, &n1_scored, &n2, &n3_refs, &n4_cpe, &n5_scored, &n6, &n7, &n8,
        ],
        vec![
            &b1_scored, &b2, &n1_cpe, &n2, &n3_refs, &n4_cpe, &n5_scored, &n6, &n7, &n8, &n9,
        ],
        vec![
            &b1_scored, &b2, &n1_cpe, &n2, &n3_refs, &n4_cpe, &n5_scored, &n6, &n7, &n8, &n9_scored,
        ],
    ];
    days.into_iter()
        .enumerate()
        .map(|(i, recs)| Snapshot::new(day(i as u32 + 1), recs.into_iter().cloned()).unwrap())
        .collect()
}

/// Hand-computed expectations for [`analytics_history`].
pub mod expected {
    /// (day, total, missing cvss, missing cpe, missing mitigation) for days 2..=10.
    pub const DAILY: [(u32, usize, usize, usize, usize); 9] = [
        (2, 2, 1, 1, 1),
        (3, 1, 1, 0, 0),
        (4, 1, 0, 1, 1),
        (5, 1, 1, 0, 1),
        (6, 1, 0, 0, 0),
        (7, 0, 0, 0, 0),
        (8, 2, 1, 1, 1),
        (9, 1, 1, 0, 0),
        (10, 0, 0, 0, 0),
    ];
    /// (cve number, completed day, days) for CVSS.
    pub const CVSS_DELAYS: [(usize, u32, i64); 3] = [(11, 4, 2), (15, 7, 2), (19, 10, 1)];
    /// completed, updated without the field, never updated.
    pub const CVSS_SPLIT: (usize, usize, usize) = (3, 1, 1);
    pub const CPE_DELAYS: [(usize, u32, i64); 2] = [(11, 9, 7), (14, 6, 2)];
    pub const CPE_SPLIT: (usize, usize, usize) = (2, 0, 1);
    /// (vendor, total, initially unscored) in report order.
    pub const VENDORS: [(&str, usize, usize); 5] = [
        ("globex", 2, 2),
        ("umbrella", 2, 2),
        ("acme", 2, 1),
        ("hooli", 1, 0),
        ("initech", 2, 0),
    ];
    pub const WITHOUT_VENDOR: usize = 1;
    /// Critical, High, Medium, Low: (count, pct) for initially and later scored.
    pub const TABLE_INITIAL: [(u64, u64); 4] = [(1, 25), (0, 0), (2, 50), (1, 25)];
    pub const TABLE_LATER: [(u64, u64); 4] = [(1, 33), (2, 67), (0, 0), (0, 0)];
}

/// Accumulates named checks so one test can report every mismatch at once.
#[derive(Default)]
pub struct Mismatches(pub Vec<String>);

impl Mismatches {
    pub fn check<T: PartialEq + std::fmt::Debug>(&mut self, what: &str, got: T, want: T) {
        if got != want {
            self.0.push(format!("{what}: got {got:?}, want {want:?}"));
        }
    }

    pub fn into_result(self) -> Result<(), String> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(self.0.join("; "))
        }
    }
}

pub fn count_by<K: Ord, T>(items: &[T], key: impl Fn(&T) -> K) -> BTreeMap<K, usize> {
    let mut out = BTreeMap::new();
    for item in items {
        *out.entry(key(item)).or_default() += 1;
    }
    out
}
