//! Portable JSON model files.
//!
//! A file is a single object:
//!
//! ```json
//! { "format": "rssiloc-model", "version": 1, "model": { "type": "position", ... } }
//! ```
//!
//! `model.type` is one of `position`, `knn`, `mlp` or `treeloc`; the remaining
//! fields hold the hyperparameters and fitted parameters of that model.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::TreeLocModel;
use crate::error::{Error, Result};
use crate::learners::{KnnModel, MlpModel, PositionModel};

pub const FORMAT_NAME: &str = "rssiloc-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelRecord {
    Position(PositionModel),
    Knn(KnnModel),
    Mlp(MlpModel),
    Treeloc(TreeLocModel),
}

impl ModelRecord {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelRecord::Position(_) => "position",
            ModelRecord::Knn(_) => "knn",
            ModelRecord::Mlp(_) => "mlp",
            ModelRecord::Treeloc(_) => "treeloc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub model: ModelRecord,
}

impl ModelFile {
    pub fn new(model: ModelRecord) -> Self {
        Self { format: FORMAT_NAME.to_string(), version: FORMAT_VERSION, model }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if f.format != FORMAT_NAME {
            return Err(Error::ModelFormat(format!("unexpected format `{}`", f.format)));
        }
        if f.version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {}", f.version)));
        }
        Ok(f)
    }
}

/// Writes the model atomically.
pub fn save_model(path: &Path, model: ModelRecord) -> Result<()> {
    let text = ModelFile::new(model).to_json()?;
    crate::ingest::write_atomic(path, text.as_bytes())
}

pub fn load_model(path: &Path) -> Result<ModelRecord> {
    Ok(ModelFile::from_json(&fs::read_to_string(path)?)?.model)
}
