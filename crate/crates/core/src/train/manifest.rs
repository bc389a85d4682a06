use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Record of one run: what was configured, on which data, and how it ended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub corpus_hash: String,
    pub metrics: serde_json::Value,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        crate::io::write_bytes_atomic(path, text.as_bytes())
    }
}
