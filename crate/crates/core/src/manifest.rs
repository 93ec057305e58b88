//! Provenance record attached to every output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// True when `SOURCE_DATE_EPOCH` is set: timestamps are pinned and wall
/// times are omitted so outputs can be reproduced byte for byte.
pub fn reproducible_mode() -> bool {
    std::env::var_os("SOURCE_DATE_EPOCH").is_some()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: BTreeMap<String, String>,
    /// SHA-256 of the raw input bytes, if the command read data.
    pub input_sha256: Option<String>,
    pub version: String,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, seed: u64) -> Self {
        Self {
            command: command.into(),
            flags: BTreeMap::new(),
            input_sha256: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            timestamp: timestamp(),
        }
    }

    pub fn flag(mut self, name: &str, value: impl ToString) -> Self {
        self.flags.insert(name.to_string(), value.to_string());
        self
    }

    pub fn with_input(mut self, bytes: &[u8]) -> Self {
        self.input_sha256 = Some(sha256_hex(bytes));
        self
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn timestamp() -> u64 {
    if let Some(epoch) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
    {
        return epoch;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}
