//! From-scratch regression models: a Random Forest of CART trees with
//! impurity-based feature importance, and a single-hidden-layer MLP trained
//! by full-batch gradient descent.

mod forest;
mod io;
mod mlp;
mod tree;

pub use forest::{train_forest, FeatureImportance, ForestConfig, ForestModel};
pub use io::{load_model, model_from_json, model_to_json, save_model, Model, MODEL_FORMAT_VERSION};
pub use mlp::{train_mlp, MlpConfig, MlpModel};
pub use tree::{RegressionTree, TreeNode};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("input dimensionality mismatch: model expects {expected}, got {got}")]
    DimensionalityMismatch { expected: usize, got: usize },
    #[error("training loss became non-finite at iteration {iteration} (divergence)")]
    NonFiniteLoss { iteration: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("model file error: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}
