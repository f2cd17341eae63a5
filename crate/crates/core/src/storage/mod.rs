//! Durable datasets and the catalog of entities that live in dataverses.

mod catalog;
mod dataset;
pub mod wal;

use std::io;
use std::path::Path;

pub use catalog::{
    BrokerDecl, Catalog, ChannelDef, Dataverse, FeedConnection, FeedDecl, DEAD_LETTERS,
    PULL_RESULTS,
};
pub use dataset::{Dataset, DatasetRecord, DatasetSnapshot};

#[derive(Debug, Clone)]
pub struct StorageOptions {
    /// fsync after every append.
    pub sync: bool,
    /// A log is compacted once it holds this many entries and at least twice
    /// as many as there are live records.
    pub compact_min_entries: u64,
}

impl Default for StorageOptions {
    fn default() -> Self {
        StorageOptions {
            sync: true,
            compact_min_entries: 1024,
        }
    }
}

/// Replaces `path` with pretty-printed JSON via a temp file and rename.
pub(crate) fn write_json_atomically(path: &Path, v: &serde_json::Value) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let bytes = serde_json::to_vec_pretty(v).map_err(io::Error::other)?;
    wal::write_file_atomically(path, &bytes)
}

/// Reads a JSON file written by [`write_json_atomically`]; `None` if absent.
pub(crate) fn read_json(path: &Path) -> io::Result<Option<serde_json::Value>> {
    match std::fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}
