//! Shared domain types. Every validated type rejects invariant violations at
//! construction and on deserialization; nothing here performs I/O.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A CVE identifier such as `CVE-2020-1234`.
///
/// Ordering is numeric on (year, sequence), so `CVE-2021-9999` sorts before
/// `CVE-2021-10000`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CveId(String);

impl CveId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let valid = id
            .strip_prefix("CVE-")
            .and_then(|rest| rest.split_once('-'))
            .is_some_and(|(year, seq)| {
                year.len() == 4
                    && year.bytes().all(|b| b.is_ascii_digit())
                    && seq.len() >= 4
                    && seq.bytes().all(|b| b.is_ascii_digit())
            });
        if valid {
            Ok(CveId(id))
        } else {
            Err(Error::invalid("CVE id", id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn numeric_key(&self) -> (u32, u64) {
        let (year, seq) = self.0[4..].split_once('-').expect("validated");
        // Sequence numbers are bounded in practice; saturate rather than panic on absurd input.
        (
            year.parse().unwrap_or(u32::MAX),
            seq.parse().unwrap_or(u64::MAX),
        )
    }
}

impl Ord for CveId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.numeric_key()
            .cmp(&other.numeric_key())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for CveId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl TryFrom<String> for CveId {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        CveId::new(value)
    }
}

impl From<CveId> for String {
    fn from(value: CveId) -> Self {
        value.0
    }
}

impl FromStr for CveId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CveId::new(s)
    }
}

impl fmt::Display for CveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// CVSS v3 base score held as an exact count of tenths (0..=100).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CvssScore(u8);

impl CvssScore {
    pub const MAX_TENTHS: u8 = 100;

    pub fn from_tenths(tenths: u8) -> Result<Self> {
        if tenths <= Self::MAX_TENTHS {
            Ok(CvssScore(tenths))
        } else {
            Err(Error::Domain(format!(
                "CVSS score {}.{} outside [0.0, 10.0]",
                tenths / 10,
                tenths % 10
            )))
        }
    }

    /// Accepts a decimal with at most one fractional digit.
    pub fn from_f64(value: f64) -> Result<Self> {
        if !value.is_finite() || !(0.0..=10.0).contains(&value) {
            return Err(Error::Domain(format!(
                "CVSS score {value} outside [0.0, 10.0]"
            )));
        }
        let scaled = value * 10.0;
        let rounded = scaled.round();
        if (scaled - rounded).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "CVSS score {value} has more than one fractional digit"
            )));
        }
        Self::from_tenths(rounded as u8)
    }

    pub fn tenths(self) -> u8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 10.0
    }

    pub fn severity(self) -> SeverityLevel {
        match self.0 {
            0 => SeverityLevel::None,
            1..=39 => SeverityLevel::Low,
            40..=69 => SeverityLevel::Medium,
            70..=89 => SeverityLevel::High,
            _ => SeverityLevel::Critical,
        }
    }
}

impl fmt::Display for CvssScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

impl FromStr for CvssScore {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let value: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::invalid("CVSS score", s))?;
        CvssScore::from_f64(value)
    }
}

impl Serialize for CvssScore {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for CvssScore {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = f64::deserialize(deserializer)?;
        CvssScore::from_f64(value).map_err(serde::de::Error::custom)
    }
}

/// Qualitative CVSS v3 severity. `Unscored` stands for an absent score and
/// sits outside the `None < Low < Medium < High < Critical` scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SeverityLevel {
    None,
    Low,
    Medium,
    High,
    Critical,
    Unscored,
}

impl SeverityLevel {
    /// Position on the scored scale; `None` for `Unscored`.
    pub fn scale_rank(self) -> Option<u8> {
        match self {
            SeverityLevel::None => Some(0),
            SeverityLevel::Low => Some(1),
            SeverityLevel::Medium => Some(2),
            SeverityLevel::High => Some(3),
            SeverityLevel::Critical => Some(4),
            SeverityLevel::Unscored => None,
        }
    }

    /// Ticket output priority: CRITICAL first, then UNSCORED, then the rest
    /// of the scale downwards.
    pub fn priority(self) -> u8 {
        match self {
            SeverityLevel::Critical => 0,
            SeverityLevel::Unscored => 1,
            SeverityLevel::High => 2,
            SeverityLevel::Medium => 3,
            SeverityLevel::Low => 4,
            SeverityLevel::None => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SeverityLevel::None => "NONE",
            SeverityLevel::Low => "LOW",
            SeverityLevel::Medium => "MEDIUM",
            SeverityLevel::High => "HIGH",
            SeverityLevel::Critical => "CRITICAL",
            SeverityLevel::Unscored => "UNSCORED",
        }
    }
}

impl fmt::Display for SeverityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A parsed CPE 2.3 formatted string. Only part, vendor, product and version
/// are modeled; the original string is kept in `raw`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CpeUri {
    part: char,
    vendor: String,
    product: String,
    version: String,
    raw: String,
}

impl CpeUri {
    pub fn parse(raw: &str) -> Result<Self> {
        let rest = raw
            .strip_prefix("cpe:2.3:")
            .ok_or_else(|| Error::invalid("CPE", format!("{raw:?} lacks cpe:2.3: prefix")))?;
        let fields = split_cpe_fields(rest);
        if fields.len() < 3 {
            return Err(Error::invalid("CPE", format!("{raw:?} has too few fields")));
        }
        let part = match fields[0].as_str() {
            "a" => 'a',
            "o" => 'o',
            "h" => 'h',
            other => return Err(Error::invalid("CPE", format!("{raw:?} has part {other:?}"))),
        };
        let vendor = fields[1].to_lowercase();
        let product = fields[2].to_lowercase();
        if vendor.is_empty() || product.is_empty() {
            return Err(Error::invalid(
                "CPE",
                format!("{raw:?} has empty vendor or product"),
            ));
        }
        let version = fields
            .get(3)
            .filter(|v| !v.is_empty())
            .cloned()
            .unwrap_or_else(|| "*".to_string());
        Ok(CpeUri {
            part,
            vendor,
            product,
            version,
            raw: raw.to_string(),
        })
    }

    pub fn part(&self) -> char {
        self.part
    }

    pub fn vendor(&self) -> &str {
        &self.vendor
    }

    pub fn product(&self) -> &str {
        &self.product
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }
}

/// Splits on unescaped ':' and drops the escaping backslashes.
fn split_cpe_fields(s: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                if let Some(escaped) = chars.next() {
                    current.push(escaped);
                }
            }
            ':' => fields.push(std::mem::take(&mut current)),
            _ => current.push(c),
        }
    }
    fields.push(current);
    fields
}

impl fmt::Display for CpeUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl FromStr for CpeUri {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CpeUri::parse(s)
    }
}

impl Serialize for CpeUri {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for CpeUri {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        CpeUri::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// Canonical `{name, vendor, version}` identity of a product.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawWellFormedName")]
pub struct WellFormedName {
    name: String,
    vendor: String,
    version: String,
}

#[derive(Deserialize)]
struct RawWellFormedName {
    name: String,
    vendor: String,
    #[serde(default)]
    version: String,
}

impl TryFrom<RawWellFormedName> for WellFormedName {
    type Error = Error;
    fn try_from(raw: RawWellFormedName) -> Result<Self> {
        WellFormedName::new(raw.name, raw.vendor, raw.version)
    }
}

impl WellFormedName {
    /// Validates already-standardized parts. Use `normalize` to build one
    /// from raw strings.
    pub fn new(
        name: impl Into<String>,
        vendor: impl Into<String>,
        version: impl Into<String>,
    ) -> Result<Self> {
        let name = name.into();
        let vendor = vendor.into();
        if name.is_empty() {
            return Err(Error::invalid("well-formed name", "product name is empty"));
        }
        for (field, value) in [("name", &name), ("vendor", &vendor)] {
            if value.chars().any(char::is_uppercase) {
                return Err(Error::invalid(
                    "well-formed name",
                    format!("{field} {value:?} contains uppercase characters"),
                ));
            }
            if value.contains(['(', ')', '{', '}']) {
                return Err(Error::invalid(
                    "well-formed name",
                    format!("{field} {value:?} contains bracketed content"),
                ));
            }
        }
        Ok(WellFormedName {
            name,
            vendor,
            version: version.into(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vendor(&self) -> &str {
        &self.vendor
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn with_version(&self, version: impl Into<String>) -> Self {
        WellFormedName {
            version: version.into(),
            ..self.clone()
        }
    }

    pub fn key(&self) -> ProductKey {
        ProductKey {
            vendor: self.vendor.clone(),
            name: self.name.clone(),
        }
    }
}

/// Version-agnostic product identity used for CPE matching and ticket grouping.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductKey {
    pub vendor: String,
    pub name: String,
}

/// One inventory row together with its derived well-formed name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetRecord {
    pub asset_id: String,
    pub raw_product: String,
    pub raw_vendor: String,
    pub raw_version: String,
    pub cpe: Option<CpeUri>,
    pub wfn: WellFormedName,
}

/// One NVD CVE entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCveRecord")]
pub struct CveRecord {
    id: CveId,
    published: NaiveDate,
    last_modified: NaiveDate,
    summary: String,
    cvss3_base: Option<CvssScore>,
    cpe_list: Vec<CpeUri>,
    references: Vec<String>,
}

#[derive(Deserialize)]
struct RawCveRecord {
    id: CveId,
    published: NaiveDate,
    last_modified: NaiveDate,
    summary: String,
    cvss3_base: Option<CvssScore>,
    #[serde(default)]
    cpe_list: Vec<CpeUri>,
    #[serde(default)]
    references: Vec<String>,
}

impl TryFrom<RawCveRecord> for CveRecord {
    type Error = Error;
    fn try_from(raw: RawCveRecord) -> Result<Self> {
        CveRecord::new(
            raw.id,
            raw.published,
            raw.last_modified,
            raw.summary,
            raw.cvss3_base,
            raw.cpe_list,
            raw.references,
        )
    }
}

impl CveRecord {
    pub fn new(
        id: CveId,
        published: NaiveDate,
        last_modified: NaiveDate,
        summary: impl Into<String>,
        cvss3_base: Option<CvssScore>,
        cpe_list: Vec<CpeUri>,
        references: Vec<String>,
    ) -> Result<Self> {
        if last_modified < published {
            return Err(Error::invalid(
                "CVE record",
                format!("{id}: last_modified {last_modified} precedes published {published}"),
            ));
        }
        Ok(CveRecord {
            id,
            published,
            last_modified,
            summary: summary.into(),
            cvss3_base,
            cpe_list,
            references,
        })
    }

    pub fn id(&self) -> &CveId {
        &self.id
    }

    pub fn published(&self) -> NaiveDate {
        self.published
    }

    pub fn last_modified(&self) -> NaiveDate {
        self.last_modified
    }

    pub fn summary(&self) -> &str {
        &self.summary
    }

    pub fn cvss3_base(&self) -> Option<CvssScore> {
        self.cvss3_base
    }

    pub fn cpe_list(&self) -> &[CpeUri] {
        &self.cpe_list
    }

    pub fn references(&self) -> &[String] {
        &self.references
    }

    pub fn severity(&self) -> SeverityLevel {
        self.cvss3_base
            .map_or(SeverityLevel::Unscored, CvssScore::severity)
    }

    /// A non-empty reference list counts as a published mitigation.
    pub fn has_mitigation(&self) -> bool {
        !self.references.is_empty()
    }

    pub fn with_cvss3(self, cvss3_base: Option<CvssScore>) -> Self {
        CveRecord { cvss3_base, ..self }
    }

    pub fn with_cpe_list(self, cpe_list: Vec<CpeUri>) -> Self {
        CveRecord { cpe_list, ..self }
    }

    pub fn with_references(self, references: Vec<String>) -> Self {
        CveRecord { references, ..self }
    }

    pub fn with_last_modified(self, last_modified: NaiveDate) -> Result<Self> {
        CveRecord::new(
            self.id,
            self.published,
            last_modified,
            self.summary,
            self.cvss3_base,
            self.cpe_list,
            self.references,
        )
    }
}

/// How a CVE was tied to an asset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MatchVia {
    Cpe,
    Summary,
}

/// One work item per (vendor, product name) group and run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTicket")]
pub struct Ticket {
    pub key: ProductKey,
    pub cve_ids: Vec<CveId>,
    pub matched_assets: Vec<String>,
    pub max_severity: SeverityLevel,
    pub created: NaiveDate,
    pub via: BTreeMap<CveId, MatchVia>,
}

#[derive(Deserialize)]
struct RawTicket {
    key: ProductKey,
    cve_ids: Vec<CveId>,
    matched_assets: Vec<String>,
    max_severity: SeverityLevel,
    created: NaiveDate,
    via: BTreeMap<CveId, MatchVia>,
}

impl TryFrom<RawTicket> for Ticket {
    type Error = Error;
    fn try_from(raw: RawTicket) -> Result<Self> {
        if raw.cve_ids.is_empty() {
            return Err(Error::invalid("ticket", "cve_ids is empty"));
        }
        let distinct: BTreeSet<_> = raw.cve_ids.iter().collect();
        if distinct.len() != raw.cve_ids.len() {
            return Err(Error::invalid("ticket", "duplicate CVE id"));
        }
        Ok(Ticket {
            key: raw.key,
            cve_ids: raw.cve_ids,
            matched_assets: raw.matched_assets,
            max_severity: raw.max_severity,
            created: raw.created,
            via: raw.via,
        })
    }
}

/// New and changed records between two dated snapshots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotDiff {
    pub date_from: NaiveDate,
    pub date_to: NaiveDate,
    pub new_cves: Vec<CveRecord>,
    pub updated_cves: Vec<(CveRecord, CveRecord)>,
}
