use chrono::{DateTime, Utc};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

use enex_core::ChainSpec;

/// Provenance record written beside every file output. Rerunning the same
/// command with the same seed reproduces the data files bit-for-bit.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub spec: ChainSpec,
    pub command: String,
    pub seed: u64,
    pub parameters: BTreeMap<String, String>,
    pub tool_version: String,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
}

impl RunManifest {
    pub fn new(spec: &ChainSpec, seed: u64) -> Self {
        RunManifest {
            spec: spec.clone(),
            command: std::env::args().collect::<Vec<_>>().join(" "),
            seed,
            parameters: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started: Utc::now(),
            finished: Utc::now(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn finish(mut self) -> Self {
        self.finished = Utc::now();
        self
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n")
    }
}
