//! Vulnerability triage over NVD feeds: relate CVEs to inventory assets with
//! or without CPE data, group matches into per-product tickets, and measure
//! how complete the feed is over time.

pub mod analytics;
pub mod error;
pub mod ingest;
pub mod matcher;
pub mod model;
pub mod normalize;
pub mod ticketer;

pub use error::{Error, Result};
