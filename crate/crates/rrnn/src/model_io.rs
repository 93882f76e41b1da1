//! JSON artifacts: models, training histories, pruning reports.
//!
//! Floats are written in shortest round-trip form and parsed back exactly,
//! so a saved model scores bit-for-bit like the one in memory.

use std::path::Path;

use rrnn_core::RationalModel;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "rrnn-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    d_emb: usize,
    lengths: Vec<usize>,
    params: Vec<f64>,
}

pub fn model_to_json(model: &RationalModel) -> String {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        d_emb: model.d_emb(),
        lengths: model.lengths().to_vec(),
        params: model.params().to_vec(),
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

pub fn model_from_json(text: &str, path: &Path) -> Result<RationalModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::json(path, e))?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "{}: expected {MODEL_FORMAT} version {MODEL_VERSION}, found {} version {}",
            path.display(),
            file.format,
            file.version
        )));
    }
    Ok(RationalModel::from_params(file.d_emb, &file.lengths, file.params)?)
}

pub fn save_model(path: &Path, model: &RationalModel) -> Result<()> {
    std::fs::write(path, model_to_json(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<RationalModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}
