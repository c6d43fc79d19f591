//! Parsing of NVD feeds, the CPE dictionary and asset inventories, plus the
//! dated snapshot store.

mod dictionary;
mod feed;
mod inventory;
mod snapshot;

pub use dictionary::{parse_cpe_dictionary, CpeDictionary, DictionaryParse};
pub use feed::{parse_feed, read_feed_file, read_input_file, FeedParse, RejectedItem};
pub use inventory::{parse_asset_inventory, InventoryParse, RejectedRow};
pub use snapshot::{diff_snapshots, Snapshot, SnapshotStore};
