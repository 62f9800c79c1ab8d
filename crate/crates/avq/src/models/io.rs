//! Versioned JSON serialization for trained models. Parameters round-trip
//! bit-exactly (serde_json emits shortest-roundtrip float literals), so a
//! reloaded model reproduces predictions identically.

use super::{ForestModel, MlpModel, ModelError};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Current model file format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A trained model of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "snake_case")]
pub enum Model {
    RandomForest(ForestModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn predict(&self, x: &[f64]) -> Result<f64, ModelError> {
        match self {
            Model::RandomForest(m) => m.predict(x),
            Model::Mlp(m) => m.predict(x),
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            Model::RandomForest(m) => m.feature_names(),
            Model::Mlp(m) => m.feature_names(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::RandomForest(_) => "random_forest",
            Model::Mlp(_) => "mlp",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: Model,
}

/// Serialize a model to its JSON document.
pub fn model_to_json(model: &Model) -> Result<String, ModelError> {
    serde_json::to_string_pretty(&ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    })
    .map_err(|e| ModelError::Format(e.to_string()))
}

/// Parse a model JSON document, rejecting unknown format versions.
pub fn model_from_json(json: &str) -> Result<Model, ModelError> {
    let file: ModelFile =
        serde_json::from_str(json).map_err(|e| ModelError::Format(e.to_string()))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(ModelError::UnsupportedVersion(file.format_version));
    }
    Ok(file.model)
}

pub fn save_model(path: &Path, model: &Model) -> Result<(), ModelError> {
    let json = model_to_json(model)?;
    std::fs::write(path, json).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<Model, ModelError> {
    let json = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    model_from_json(&json)
}
