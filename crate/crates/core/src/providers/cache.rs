//! Content-addressed response cache.
//!
//! Layout: `<root>/<first two hex chars>/<key>.json`, with image payloads in a
//! sibling `<key>.png`. Files are written to a temporary name and renamed into
//! place, so readers never observe a partial record.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::ProviderKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CachedResponse {
    Text(String),
    Embedding(Vec<f64>),
    /// File name of the PNG stored next to the record.
    Image(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSummary {
    pub kind: ProviderKind,
    pub endpoint: String,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub cache_key: String,
    pub request: Value,
    pub response: CachedResponse,
    pub created_at: DateTime<Utc>,
    pub provider: ProviderSummary,
}

/// SHA-256 of the canonical JSON encoding. `serde_json::Value` objects keep
/// their keys sorted, so field order in the source never changes the key.
pub fn cache_key(request: &Value) -> String {
    let bytes = serde_json::to_vec(request).expect("JSON values always serialize");
    hex::encode(Sha256::digest(bytes))
}

pub fn is_valid_key(key: &str) -> bool {
    key.len() == 64 && key.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}

#[derive(Debug)]
pub struct ResponseCache {
    root: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().expect("cache paths have a parent");
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.{}.{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("record"),
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResponseCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn shard(&self, key: &str) -> PathBuf {
        self.root.join(&key[..2])
    }

    pub fn record_path(&self, key: &str) -> PathBuf {
        self.shard(key).join(format!("{key}.json"))
    }

    pub fn image_path(&self, key: &str) -> PathBuf {
        self.shard(key).join(format!("{key}.png"))
    }

    /// Returns `None` for absent, malformed, or corrupted records.
    pub fn lookup(&self, key: &str) -> Option<GenerationRecord> {
        if !is_valid_key(key) {
            log::warn!("cache lookup with malformed key {key:?}");
            return None;
        }
        let path = self.record_path(key);
        let bytes = fs::read(&path).ok()?;
        match serde_json::from_slice::<GenerationRecord>(&bytes) {
            Ok(rec) if rec.cache_key == key => {
                if let CachedResponse::Image(_) = rec.response {
                    if !self.image_path(key).is_file() {
                        log::warn!("cache record {key} is missing its image payload; treating as miss");
                        return None;
                    }
                }
                Some(rec)
            }
            Ok(_) => {
                log::warn!("cache record {} has a mismatched key; treating as miss", path.display());
                None
            }
            Err(e) => {
                log::warn!("corrupted cache record {}: {e}; treating as miss", path.display());
                None
            }
        }
    }

    pub fn store(&self, record: &GenerationRecord) -> std::io::Result<()> {
        if !is_valid_key(&record.cache_key) {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("malformed cache key {:?}", record.cache_key),
            ));
        }
        let bytes = serde_json::to_vec_pretty(record).map_err(std::io::Error::other)?;
        write_atomic(&self.record_path(&record.cache_key), &bytes)
    }

    pub fn store_image(&self, key: &str, png: &[u8]) -> std::io::Result<()> {
        write_atomic(&self.image_path(key), png)
    }

    pub fn read_image(&self, key: &str) -> std::io::Result<Vec<u8>> {
        fs::read(self.image_path(key))
    }
}
