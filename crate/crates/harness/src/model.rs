//! Versioned JSON model files.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use srml_core::{LossKind, ProblemKind, SolverConfig, WeightMatrix};

use crate::error::{HarnessError, Result};

pub const MODEL_FORMAT: &str = "srml-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub kind: ProblemKind,
    pub loss: LossKind,
    pub num_features: usize,
    pub num_tasks: usize,
    pub task_ids: Vec<String>,
    /// One weight vector per task.
    pub weights: Vec<Vec<f64>>,
    pub hyperparams: SolverConfig,
}

impl ModelFile {
    pub fn new(
        weights: &WeightMatrix,
        loss: LossKind,
        task_ids: Vec<String>,
        hyperparams: SolverConfig,
    ) -> Self {
        let (d, t) = weights.shape();
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            kind: loss.problem_kind(),
            loss,
            num_features: d,
            num_tasks: t,
            task_ids,
            weights: (0..t).map(|i| weights.column(i).iter().copied().collect()).collect(),
            hyperparams,
        }
    }

    pub fn weight_matrix(&self) -> Result<WeightMatrix> {
        if self.weights.len() != self.num_tasks
            || self.weights.iter().any(|w| w.len() != self.num_features)
        {
            return Err(HarnessError::InvalidConfig(
                "model weights do not match the declared shape".into(),
            ));
        }
        let cols: Vec<DVector<f64>> = self
            .weights
            .iter()
            .map(|w| DVector::from_column_slice(w))
            .collect();
        Ok(WeightMatrix::from_columns(&cols))
    }
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    let text = serde_json::to_string_pretty(model).map_err(|e| HarnessError::io(path, e))?;
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| HarnessError::io(path, format!("truncated or malformed model file: {e}")))?;
    if value.get("format").and_then(|f| f.as_str()) != Some(MODEL_FORMAT) {
        return Err(HarnessError::io(path, "not an srml model file"));
    }
    let version = value.get("version").and_then(|v| v.as_u64());
    if version != Some(u64::from(MODEL_VERSION)) {
        return Err(HarnessError::VersionMismatch {
            found: version.map_or(0, |v| v as u32),
            expected: MODEL_VERSION,
        });
    }
    let model: ModelFile = serde_json::from_value(value)
        .map_err(|e| HarnessError::io(path, format!("malformed model file: {e}")))?;
    model.weight_matrix()?;
    Ok(model)
}
