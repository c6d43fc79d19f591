//! Product and vendor name standardization, and construction of well-formed
//! names from CPEs or raw inventory strings.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::ingest::CpeDictionary;
use crate::model::{CpeUri, WellFormedName};

/// Generic words that carry no product identity, plus corporate suffixes.
pub const DEFAULT_STOP_WORDS: &[&str] = &[
    "system",
    "software",
    "library",
    "version",
    "app",
    "beta",
    "alpha",
    "inc",
    "ltd",
    "llc",
    "corp",
    "corporation",
    "co",
    "gmbh",
    "project",
    "edition",
];

const SEPARATORS: &[char] = &[',', ';', ':', '/', '\\', '_'];
const TRIMMED: &[char] = &[
    '.', '!', '?', '\'', '"', '`', '*', '-', '[', ']', '<', '>', '|',
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWordList {
    words: BTreeSet<String>,
}

impl StopWordList {
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: BTreeSet<String> = words.into_iter().map(Into::into).collect();
        if words.is_empty() {
            return Err(Error::invalid("stop-word list", "list is empty"));
        }
        if let Some(bad) = words.iter().find(|w| {
            w.is_empty() || w.chars().any(char::is_uppercase) || w.contains(char::is_whitespace)
        }) {
            return Err(Error::invalid(
                "stop-word list",
                format!("{bad:?} is not a single lowercase token"),
            ));
        }
        Ok(StopWordList { words })
    }

    /// Parses one token per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let words = text
            .lines()
            .map(|line| line.split('#').next().unwrap_or("").trim())
            .filter(|line| !line.is_empty())
            .map(str::to_string);
        StopWordList::new(words)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

impl Default for StopWordList {
    fn default() -> Self {
        StopWordList::new(DEFAULT_STOP_WORDS.iter().copied()).expect("default list is valid")
    }
}

/// Lowercases and splits on whitespace and `, ; : / \ _`, trimming
/// surrounding punctuation from each token. Empty tokens are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| c.is_whitespace() || SEPARATORS.contains(&c))
        .map(|t| t.trim_matches(TRIMMED))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Drops everything inside `(...)` and `{...}`, delimiters included.
/// Unbalanced closing delimiters are dropped; an unclosed opener swallows
/// the rest of the input.
fn strip_bracketed(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '(' | '{' => depth += 1,
            ')' | '}' => {
                depth = depth.saturating_sub(1);
                // Keep words on either side of the span apart.
                out.push(' ');
            }
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

/// Numbers, versions and dates: at least one digit and nothing but digits,
/// dots and dashes.
fn is_numeric_token(token: &str) -> bool {
    token.bytes().any(|b| b.is_ascii_digit())
        && token
            .bytes()
            .all(|b| b.is_ascii_digit() || b == b'.' || b == b'-')
}

#[derive(Debug, Clone, Default)]
pub struct Normalizer {
    stop_words: StopWordList,
}

impl Normalizer {
    pub fn new(stop_words: StopWordList) -> Self {
        Normalizer { stop_words }
    }

    pub fn stop_words(&self) -> &StopWordList {
        &self.stop_words
    }

    /// Standardizes a product or vendor name. Total; the result may be empty.
    pub fn standardize(&self, raw: &str) -> String {
        let stripped = strip_bracketed(&raw.to_lowercase());
        tokenize(&stripped)
            .into_iter()
            .filter(|t| !is_numeric_token(t) && !self.stop_words.contains(t))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn well_formed_from_cpe(&self, cpe: &CpeUri) -> Result<WellFormedName> {
        let name = self.standardize(&cpe.product().replace('_', " "));
        if name.is_empty() {
            return Err(Error::invalid(
                "well-formed name",
                format!("CPE product {:?} standardizes to empty", cpe.product()),
            ));
        }
        let vendor = self.standardize(&cpe.vendor().replace('_', " "));
        let version = match cpe.version() {
            "*" => "",
            v => v,
        };
        WellFormedName::new(name, vendor, version)
    }

    /// Builds a well-formed name from raw inventory strings, preferring an
    /// exact (name, vendor) dictionary hit.
    pub fn well_formed_from_raw(
        &self,
        product: &str,
        vendor: &str,
        version: &str,
        dict: &CpeDictionary,
    ) -> Result<WellFormedName> {
        let name = self.standardize(product);
        if name.is_empty() {
            return Err(Error::invalid(
                "well-formed name",
                format!("product {product:?} standardizes to empty"),
            ));
        }
        let vendor = self.standardize(vendor);
        if let Some(entry) = dict.lookup(&name, &vendor) {
            return Ok(entry.with_version(version));
        }
        WellFormedName::new(name, vendor, version)
    }
}
