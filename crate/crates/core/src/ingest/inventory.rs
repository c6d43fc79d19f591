//! Asset inventory CSV: `asset_id,product_name,vendor_name,version,cpe23`.

use crate::error::{Error, Result};
use crate::ingest::CpeDictionary;
use crate::model::{AssetRecord, CpeUri};
use crate::normalize::Normalizer;

const REQUIRED: [&str; 4] = ["asset_id", "product_name", "vendor_name", "version"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    /// 1-based line number in the file (the header is line 1).
    pub line: u64,
    pub asset_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct InventoryParse {
    pub assets: Vec<AssetRecord>,
    pub rejects: Vec<RejectedRow>,
}

pub fn parse_asset_inventory(
    bytes: &[u8],
    normalizer: &Normalizer,
    dict: &CpeDictionary,
) -> Result<InventoryParse> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(REQUIRED) {
        *slot =
            column(name).ok_or_else(|| Error::Csv(format!("missing required column {name:?}")))?;
    }
    let cpe_col = column("cpe23");

    let mut out = InventoryParse::default();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Csv(e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("").trim().to_string();
        let [id_i, product_i, vendor_i, version_i] = idx;
        let asset_id = field(id_i);
        let raw_product = field(product_i);
        let raw_vendor = field(vendor_i);
        let raw_version = field(version_i);
        let cpe_text = cpe_col.map(field).unwrap_or_default();

        let derived = if cpe_text.is_empty() {
            normalizer
                .well_formed_from_raw(&raw_product, &raw_vendor, &raw_version, dict)
                .map(|wfn| (None, wfn))
        } else {
            CpeUri::parse(&cpe_text).and_then(|cpe| {
                normalizer
                    .well_formed_from_cpe(&cpe)
                    .map(|wfn| (Some(cpe), wfn))
            })
        };
        match derived {
            Ok((cpe, wfn)) => out.assets.push(AssetRecord {
                asset_id,
                raw_product,
                raw_vendor,
                raw_version,
                cpe,
                wfn,
            }),
            Err(e) => out.rejects.push(RejectedRow {
                line,
                asset_id,
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}
