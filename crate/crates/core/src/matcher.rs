//! Relates CVEs to inventory assets, through the CVE's CPE list when it has
//! one and through its free-text summary otherwise.
//!
//! Summary matching works on token boundaries: the summary is tokenized,
//! closed-class function words are dropped, and every contiguous n-gram up to
//! `max_phrase_len` tokens becomes a candidate phrase. A product or vendor
//! name "appears" in a summary when its own phrase form (same tokenizer) is
//! one of those n-grams. Names shorter than `min_name_len` characters never
//! take part in matching, filter construction or evaluation tallies.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::CpeDictionary;
use crate::model::{AssetRecord, CveId, CveRecord, MatchVia, ProductKey};
use crate::normalize::{tokenize, Normalizer};

pub const DEFAULT_MAX_PHRASE_LEN: usize = 4;
pub const DEFAULT_MIN_NAME_LEN: usize = 3;

/// Closed-class English words that never name a product.
pub const FUNCTION_WORDS: &[&str] = &[
    "a", "about", "after", "against", "all", "also", "am", "an", "and", "another", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "between", "both", "but", "by", "can",
    "could", "did", "do", "does", "down", "during", "each", "either", "every", "for", "from",
    "had", "has", "have", "he", "her", "here", "his", "how", "i", "if", "in", "into", "is", "it",
    "its", "may", "me", "might", "must", "my", "neither", "no", "nor", "not", "of", "off", "on",
    "only", "onto", "or", "other", "our", "out", "over", "per", "shall", "she", "should", "since",
    "so", "some", "such", "than", "that", "the", "their", "them", "then", "there", "these", "they",
    "this", "those", "through", "to", "under", "until", "up", "upon", "very", "via", "was", "we",
    "were", "what", "when", "where", "which", "while", "who", "whom", "whose", "why", "will",
    "with", "within", "without", "would", "you", "your",
];

fn is_function_word(token: &str) -> bool {
    FUNCTION_WORDS.binary_search(&token).is_ok()
}

/// Summary tokenizer: the name tokenizer, further split on hyphens, with
/// punctuation-only tokens and function words removed.
pub fn summary_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .iter()
        .flat_map(|t| t.split('-'))
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric() && c != '+' && c != '#'))
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .filter(|t| !is_function_word(t))
        .map(str::to_string)
        .collect()
}

/// The form a standardized name must take to be found among summary phrases.
pub fn phrase_key(name: &str) -> Option<String> {
    let tokens = summary_tokens(name);
    (!tokens.is_empty()).then(|| tokens.join(" "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchConfig {
    pub max_phrase_len: usize,
    pub min_name_len: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            max_phrase_len: DEFAULT_MAX_PHRASE_LEN,
            min_name_len: DEFAULT_MIN_NAME_LEN,
        }
    }
}

impl MatchConfig {
    pub fn new(max_phrase_len: usize, min_name_len: usize) -> Result<Self> {
        if max_phrase_len == 0 {
            return Err(Error::invalid(
                "match config",
                "max_phrase_len must be at least 1",
            ));
        }
        Ok(MatchConfig {
            max_phrase_len,
            min_name_len,
        })
    }

    /// Whether a standardized name is long enough to be considered at all.
    pub fn eligible(&self, name: &str) -> bool {
        !name.is_empty() && name.chars().count() >= self.min_name_len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryTerms {
    pub cve_id: Option<CveId>,
    pub terms: Vec<String>,
    pub phrases: BTreeSet<String>,
}

impl SummaryTerms {
    pub fn contains_phrase(&self, phrase: &str) -> bool {
        self.phrases.contains(phrase)
    }

    /// Whether a standardized name appears as a phrase.
    pub fn mentions(&self, name: &str) -> bool {
        phrase_key(name).is_some_and(|k| self.phrases.contains(&k))
    }
}

pub fn extract_summary_terms(
    cve_id: Option<&CveId>,
    summary: &str,
    max_phrase_len: usize,
) -> SummaryTerms {
    let terms = summary_tokens(summary);
    let mut phrases = BTreeSet::new();
    for start in 0..terms.len() {
        for len in 1..=max_phrase_len.min(terms.len() - start) {
            phrases.insert(terms[start..start + len].join(" "));
        }
    }
    SummaryTerms {
        cve_id: cve_id.cloned(),
        terms,
        phrases,
    }
}

/// Names that show up in summaries of CVEs whose CPE lists do not name them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FpFilter {
    pub vendor_names: BTreeSet<String>,
    pub product_names: BTreeSet<String>,
    pub source_year: String,
}

const SOURCE_PREFIX: &str = "#source_year=";

impl FpFilter {
    /// Renders one name list: the metadata line, then one name per line.
    pub fn render_list(names: &BTreeSet<String>, source_year: &str) -> String {
        let mut out = format!("{SOURCE_PREFIX}{source_year}\n");
        for name in names {
            out.push_str(name);
            out.push('\n');
        }
        out
    }

    pub fn render_vendors(&self) -> String {
        Self::render_list(&self.vendor_names, &self.source_year)
    }

    pub fn render_products(&self) -> String {
        Self::render_list(&self.product_names, &self.source_year)
    }

    pub fn parse(vendors: &str, products: &str) -> Result<Self> {
        let (vendor_year, vendor_names) = parse_list(vendors)?;
        let (product_year, product_names) = parse_list(products)?;
        let source_year = match (vendor_year, product_year) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::invalid(
                    "filter files",
                    format!("source years differ: {a:?} vs {b:?}"),
                ))
            }
            (a, b) => a.or(b).unwrap_or_default(),
        };
        Ok(FpFilter {
            vendor_names,
            product_names,
            source_year,
        })
    }
}

fn parse_list(text: &str) -> Result<(Option<String>, BTreeSet<String>)> {
    let mut year = None;
    let mut names = BTreeSet::new();
    for line in text.lines() {
        if let Some(label) = line.strip_prefix(SOURCE_PREFIX) {
            year = Some(label.trim().to_string());
        } else if line.starts_with('#') || line.trim().is_empty() {
            continue;
        } else {
            let name = line.trim();
            if name.chars().any(char::is_uppercase) {
                return Err(Error::invalid(
                    "filter files",
                    format!("{name:?} is not lowercase"),
                ));
            }
            names.insert(name.to_string());
        }
    }
    Ok((year, names))
}

/// Standardized vendor and product names and pairs from a record's CPE list.
struct OwnCpeNames {
    vendors: BTreeSet<String>,
    products: BTreeSet<String>,
    pairs: BTreeSet<ProductKey>,
}

fn own_cpe_names(record: &CveRecord, normalizer: &Normalizer) -> OwnCpeNames {
    let mut own = OwnCpeNames {
        vendors: BTreeSet::new(),
        products: BTreeSet::new(),
        pairs: BTreeSet::new(),
    };
    for cpe in record.cpe_list() {
        let vendor = normalizer.standardize(&cpe.vendor().replace('_', " "));
        let product = normalizer.standardize(&cpe.product().replace('_', " "));
        own.pairs.insert(ProductKey {
            vendor: vendor.clone(),
            name: product.clone(),
        });
        own.vendors.insert(vendor);
        own.products.insert(product);
    }
    own
}

/// Phrase-keyed lookup of eligible dictionary names.
struct DictionaryPhrases<'a> {
    vendors: HashMap<String, Vec<&'a str>>,
    products: HashMap<String, Vec<&'a str>>,
}

impl<'a> DictionaryPhrases<'a> {
    fn new(dict: &'a CpeDictionary, config: &MatchConfig) -> Self {
        let index = |names: BTreeSet<&'a str>| {
            let mut map: HashMap<String, Vec<&'a str>> = HashMap::new();
            for name in names.into_iter().filter(|n| config.eligible(n)) {
                if let Some(key) = phrase_key(name) {
                    map.entry(key).or_default().push(name);
                }
            }
            map
        };
        DictionaryPhrases {
            vendors: index(dict.vendor_names()),
            products: index(dict.product_names()),
        }
    }

    fn vendors_in<'s>(&'s self, terms: &'s SummaryTerms) -> impl Iterator<Item = &'a str> + 's {
        terms
            .phrases
            .iter()
            .filter_map(|p| self.vendors.get(p))
            .flatten()
            .copied()
    }

    fn products_in<'s>(&'s self, terms: &'s SummaryTerms) -> impl Iterator<Item = &'a str> + 's {
        terms
            .phrases
            .iter()
            .filter_map(|p| self.products.get(p))
            .flatten()
            .copied()
    }
}

fn require_cpe(record: &CveRecord) -> Result<()> {
    if record.cpe_list().is_empty() {
        Err(Error::Precondition(format!(
            "{} has an empty CPE list",
            record.id()
        )))
    } else {
        Ok(())
    }
}

pub fn build_fp_filter(
    corpus: &[CveRecord],
    dict: &CpeDictionary,
    normalizer: &Normalizer,
    config: &MatchConfig,
    source_year: &str,
) -> Result<FpFilter> {
    let lookup = DictionaryPhrases::new(dict, config);
    let mut filter = FpFilter {
        source_year: source_year.to_string(),
        ..FpFilter::default()
    };
    for record in corpus {
        require_cpe(record)?;
        let terms =
            extract_summary_terms(Some(record.id()), record.summary(), config.max_phrase_len);
        let own = own_cpe_names(record, normalizer);
        for vendor in lookup.vendors_in(&terms) {
            if !own.vendors.contains(vendor) {
                filter.vendor_names.insert(vendor.to_string());
            }
        }
        for product in lookup.products_in(&terms) {
            if !own.products.contains(product) {
                filter.product_names.insert(product.to_string());
            }
        }
    }
    Ok(filter)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub cve_id: CveId,
    pub asset_ids: Vec<String>,
    pub via: MatchVia,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matched_phrase: Option<String>,
}

/// Inventory indexed by product key and by name phrase.
#[derive(Debug, Clone)]
pub struct AssetIndex {
    assets: Vec<AssetRecord>,
    by_id: HashMap<String, usize>,
    by_key: HashMap<ProductKey, Vec<usize>>,
    by_name_phrase: BTreeMap<String, Vec<usize>>,
}

impl AssetIndex {
    pub fn new(assets: Vec<AssetRecord>) -> Result<Self> {
        let mut by_id = HashMap::new();
        let mut by_key: HashMap<ProductKey, Vec<usize>> = HashMap::new();
        let mut by_name_phrase: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, asset) in assets.iter().enumerate() {
            if by_id.insert(asset.asset_id.clone(), i).is_some() {
                return Err(Error::invalid(
                    "asset inventory",
                    format!("duplicate asset id {:?}", asset.asset_id),
                ));
            }
            by_key.entry(asset.wfn.key()).or_default().push(i);
            if let Some(key) = phrase_key(asset.wfn.name()) {
                by_name_phrase.entry(key).or_default().push(i);
            }
        }
        Ok(AssetIndex {
            assets,
            by_id,
            by_key,
            by_name_phrase,
        })
    }

    pub fn assets(&self) -> &[AssetRecord] {
        &self.assets
    }

    pub fn get(&self, asset_id: &str) -> Option<&AssetRecord> {
        self.by_id.get(asset_id).map(|&i| &self.assets[i])
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }
}

pub struct Matcher<'a> {
    pub normalizer: &'a Normalizer,
    pub filter: &'a FpFilter,
    pub config: MatchConfig,
}

impl Matcher<'_> {
    /// Results are ordered by first asset id. A CVE with a CPE list only ever
    /// produces a single `Cpe` result.
    pub fn match_cve(&self, cve: &CveRecord, index: &AssetIndex) -> Vec<MatchResult> {
        if !cve.cpe_list().is_empty() {
            return self.match_by_cpe(cve, index).into_iter().collect();
        }
        self.match_by_summary(cve, index)
    }

    fn match_by_cpe(&self, cve: &CveRecord, index: &AssetIndex) -> Option<MatchResult> {
        let mut ids = BTreeSet::new();
        for cpe in cve.cpe_list() {
            let Ok(wfn) = self.normalizer.well_formed_from_cpe(cpe) else {
                continue;
            };
            for &i in index.by_key.get(&wfn.key()).into_iter().flatten() {
                ids.insert(index.assets[i].asset_id.clone());
            }
        }
        (!ids.is_empty()).then(|| MatchResult {
            cve_id: cve.id().clone(),
            asset_ids: ids.into_iter().collect(),
            via: MatchVia::Cpe,
            matched_phrase: None,
        })
    }

    fn match_by_summary(&self, cve: &CveRecord, index: &AssetIndex) -> Vec<MatchResult> {
        let terms =
            extract_summary_terms(Some(cve.id()), cve.summary(), self.config.max_phrase_len);
        let mut results = Vec::new();
        for phrase in &terms.phrases {
            let Some(candidates) = index.by_name_phrase.get(phrase) else {
                continue;
            };
            let mut ids = BTreeSet::new();
            for &i in candidates {
                let wfn = &index.assets[i].wfn;
                if !self.config.eligible(wfn.name()) {
                    continue;
                }
                let vendor_present =
                    self.config.eligible(wfn.vendor()) && terms.mentions(wfn.vendor());
                if self.filter.product_names.contains(wfn.name()) && !vendor_present {
                    continue;
                }
                ids.insert(index.assets[i].asset_id.clone());
            }
            if !ids.is_empty() {
                results.push(MatchResult {
                    cve_id: cve.id().clone(),
                    asset_ids: ids.into_iter().collect(),
                    via: MatchVia::Summary,
                    matched_phrase: Some(phrase.clone()),
                });
            }
        }
        results.sort_by(|a, b| a.asset_ids.cmp(&b.asset_ids));
        results
    }

    /// Matches every CVE; output ordered by CVE id then asset id.
    pub fn match_all(&self, cves: &[CveRecord], index: &AssetIndex) -> Vec<MatchResult> {
        let mut sorted: Vec<&CveRecord> = cves.iter().collect();
        sorted.sort_by(|a, b| a.id().cmp(b.id()));
        sorted
            .into_iter()
            .flat_map(|cve| self.match_cve(cve, index))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    /// Records whose own CPE vendor or product name appears in the summary.
    pub tp: usize,
    /// Records where some own CPE vendor and its product both appear.
    pub tp_both: usize,
    pub fp: usize,
    pub fp_rate: f64,
    pub elided_names: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fp_after_filter: Option<usize>,
}

/// Per-record evaluation outcome.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RecordOutcome {
    pub tp: bool,
    pub tp_both: bool,
    /// Dictionary pairs found in the summary but missing from the CPE list.
    pub fp_pairs: BTreeSet<ProductKey>,
}

pub fn evaluate_record(
    record: &CveRecord,
    lookup_dict: &CpeDictionary,
    normalizer: &Normalizer,
    config: &MatchConfig,
) -> Result<RecordOutcome> {
    evaluate_with(
        record,
        &DictionaryPhrases::new(lookup_dict, config),
        lookup_dict,
        normalizer,
        config,
    )
}

fn evaluate_with(
    record: &CveRecord,
    lookup: &DictionaryPhrases<'_>,
    dict: &CpeDictionary,
    normalizer: &Normalizer,
    config: &MatchConfig,
) -> Result<RecordOutcome> {
    require_cpe(record)?;
    let terms = extract_summary_terms(Some(record.id()), record.summary(), config.max_phrase_len);
    let own = own_cpe_names(record, normalizer);
    let present = |name: &str| config.eligible(name) && terms.mentions(name);

    let tp = own.vendors.iter().any(|v| present(v)) || own.products.iter().any(|p| present(p));
    let tp_both = own
        .pairs
        .iter()
        .any(|k| present(&k.vendor) && present(&k.name));

    let mut fp_pairs = BTreeSet::new();
    let products: HashSet<&str> = lookup.products_in(&terms).collect();
    for product in products {
        for entry in dict.with_name(product) {
            let key = entry.key();
            if present(&key.vendor) && !own.pairs.contains(&key) {
                fp_pairs.insert(key);
            }
        }
    }
    Ok(RecordOutcome {
        tp,
        tp_both,
        fp_pairs,
    })
}

/// Distinct dictionary vendor names plus distinct product names that are too
/// short to be considered.
pub fn elided_name_count(dict: &CpeDictionary, config: &MatchConfig) -> usize {
    let short = |names: BTreeSet<&str>| names.into_iter().filter(|n| !config.eligible(n)).count();
    short(dict.vendor_names()) + short(dict.product_names())
}

pub fn evaluate_corpus(
    corpus: &[CveRecord],
    dict: &CpeDictionary,
    normalizer: &Normalizer,
    config: &MatchConfig,
) -> Result<EvalReport> {
    evaluate_corpus_filtered(corpus, dict, normalizer, config, None)
}

/// As [`evaluate_corpus`]; with a filter, also counts the records that keep
/// at least one false-positive pair whose vendor and product are both
/// outside the filter lists.
pub fn evaluate_corpus_filtered(
    corpus: &[CveRecord],
    dict: &CpeDictionary,
    normalizer: &Normalizer,
    config: &MatchConfig,
    filter: Option<&FpFilter>,
) -> Result<EvalReport> {
    let lookup = DictionaryPhrases::new(dict, config);
    let mut report = EvalReport {
        total: corpus.len(),
        tp: 0,
        tp_both: 0,
        fp: 0,
        fp_rate: 0.0,
        elided_names: elided_name_count(dict, config),
        fp_after_filter: filter.map(|_| 0),
    };
    for record in corpus {
        let outcome = evaluate_with(record, &lookup, dict, normalizer, config)?;
        report.tp += usize::from(outcome.tp);
        report.tp_both += usize::from(outcome.tp_both);
        report.fp += usize::from(!outcome.fp_pairs.is_empty());
        if let (Some(filter), Some(count)) = (filter, report.fp_after_filter.as_mut()) {
            let survives = outcome.fp_pairs.iter().any(|k| {
                !filter.vendor_names.contains(&k.vendor) && !filter.product_names.contains(&k.name)
            });
            *count += usize::from(survives);
        }
    }
    if report.total > 0 {
        report.fp_rate = report.fp as f64 / report.total as f64;
    }
    Ok(report)
}
