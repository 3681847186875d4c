use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Written next to generated dataset files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub kind: String,
    pub seed: u64,
    pub parameters: serde_json::Value,
    /// File names relative to the manifest.
    pub files: Vec<String>,
}

impl DatasetManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
