//! The NVD CPE dictionary, reduced to standardized well-formed names.

use std::collections::{BTreeSet, HashMap};

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{CpeUri, ProductKey, WellFormedName};
use crate::normalize::Normalizer;

#[derive(Debug, Clone, Default)]
pub struct CpeDictionary {
    entries: Vec<WellFormedName>,
    by_name: HashMap<String, Vec<usize>>,
    by_vendor: HashMap<String, Vec<usize>>,
}

impl CpeDictionary {
    /// Builds the dictionary, collapsing duplicate triples. Entries are kept
    /// in sorted order so iteration is deterministic.
    pub fn from_entries(entries: impl IntoIterator<Item = WellFormedName>) -> Self {
        let entries: Vec<_> = entries
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut by_name: HashMap<String, Vec<usize>> = HashMap::new();
        let mut by_vendor: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            by_name.entry(e.name().to_string()).or_default().push(i);
            by_vendor.entry(e.vendor().to_string()).or_default().push(i);
        }
        CpeDictionary {
            entries,
            by_name,
            by_vendor,
        }
    }

    pub fn entries(&self) -> &[WellFormedName] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn with_name<'a>(&'a self, name: &str) -> impl Iterator<Item = &'a WellFormedName> + 'a {
        self.by_name
            .get(name)
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
    }

    pub fn with_vendor<'a>(
        &'a self,
        vendor: &str,
    ) -> impl Iterator<Item = &'a WellFormedName> + 'a {
        self.by_vendor
            .get(vendor)
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
    }

    /// First entry (in sorted order) with exactly this name and vendor.
    pub fn lookup(&self, name: &str, vendor: &str) -> Option<&WellFormedName> {
        self.with_name(name).find(|e| e.vendor() == vendor)
    }

    pub fn product_names(&self) -> BTreeSet<&str> {
        self.by_name.keys().map(String::as_str).collect()
    }

    pub fn vendor_names(&self) -> BTreeSet<&str> {
        self.by_vendor.keys().map(String::as_str).collect()
    }

    /// Distinct version-agnostic (vendor, name) pairs.
    pub fn product_keys(&self) -> BTreeSet<ProductKey> {
        self.entries.iter().map(WellFormedName::key).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct DictionaryParse {
    pub dictionary: CpeDictionary,
    /// Entries whose name could not be parsed or standardized.
    pub skipped: usize,
}

#[derive(Deserialize)]
struct JsonEntry {
    cpe23: String,
}

/// Accepts the official XML dictionary (`cpe23-item` `name` attributes) or a
/// JSON array of `{"cpe23": "..."}` objects. Blank input is an empty dictionary.
pub fn parse_cpe_dictionary(bytes: &[u8], normalizer: &Normalizer) -> Result<DictionaryParse> {
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
    let names = match first {
        None => Vec::new(),
        Some(b'[') => {
            let entries: Vec<JsonEntry> =
                serde_json::from_slice(bytes).map_err(|e| Error::json(bytes, &e))?;
            entries.into_iter().map(|e| e.cpe23).collect()
        }
        Some(b'<') => xml_cpe23_names(bytes)?,
        Some(_) => {
            return Err(Error::invalid(
                "CPE dictionary",
                "expected an XML document or a JSON array",
            ))
        }
    };

    let mut skipped = 0;
    let mut entries = Vec::with_capacity(names.len());
    for name in names {
        match CpeUri::parse(&name).and_then(|cpe| normalizer.well_formed_from_cpe(&cpe)) {
            Ok(wfn) => entries.push(wfn),
            Err(_) => skipped += 1,
        }
    }
    Ok(DictionaryParse {
        dictionary: CpeDictionary::from_entries(entries),
        skipped,
    })
}

fn xml_cpe23_names(bytes: &[u8]) -> Result<Vec<String>> {
    let mut reader = Reader::from_reader(bytes);
    let mut buf = Vec::new();
    let mut names = Vec::new();
    loop {
        let event = reader.read_event_into(&mut buf).map_err(|e| Error::Xml {
            offset: reader.buffer_position() as usize,
            message: e.to_string(),
        })?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e)
                if e.local_name().as_ref() == b"cpe23-item" =>
            {
                for attr in e.attributes().flatten() {
                    if attr.key.local_name().as_ref() == b"name" {
                        let value = attr.unescape_value().map_err(|err| Error::Xml {
                            offset: reader.buffer_position() as usize,
                            message: err.to_string(),
                        })?;
                        names.push(value.into_owned());
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    Ok(names)
}
