//! Model persistence: a versioned, self-describing JSON document carrying
//! hyperparameters, the feature schema, and the tree structure.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RecommenderError, RecommenderModel};

const MODEL_FORMAT: &str = "reshi-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: RecommenderModel,
}

pub fn save_model(model: &RecommenderModel, path: &Path) -> Result<(), RecommenderError> {
    let doc = ModelDoc {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        model: model.clone(),
    };
    let text = serde_json::to_string_pretty(&doc).expect("model serializes");
    std::fs::write(path, text).map_err(|e| RecommenderError::ModelFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub fn load_model(path: &Path) -> Result<RecommenderModel, RecommenderError> {
    let text = std::fs::read_to_string(path).map_err(|e| RecommenderError::ModelFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let doc: ModelDoc = serde_json::from_str(&text).map_err(|e| RecommenderError::ModelFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
        return Err(RecommenderError::ModelFile {
            path: path.display().to_string(),
            reason: format!(
                "expected format `{MODEL_FORMAT}` version {MODEL_VERSION}, got `{}` version {}",
                doc.format, doc.version
            ),
        });
    }
    let tree_features = doc.model.tree.n_features();
    if tree_features != doc.model.feature_count() {
        return Err(RecommenderError::ModelFile {
            path: path.display().to_string(),
            reason: format!(
                "tree expects {tree_features} features but schema declares {}",
                doc.model.feature_count()
            ),
        });
    }
    Ok(doc.model)
}
