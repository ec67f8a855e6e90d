//! Linear regression and ε-insensitive support vector regression from
//! feature rows to TUG scores.

mod kernel;
mod lr;
mod svr;
mod tuning;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kernel::{kernel_eval, KernelSpec};
pub use lr::{fit_lr, predict_lr, LrModel};
pub use svr::{fit_svr, predict_svr, Standardization, SvrModel, SvrParams, SUPPORT_THRESHOLD};
pub use tuning::{base_gamma, tune_svr, SvrGrid, TunedSvr};

/// Version written into persisted model documents.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular design: linearly dependent columns {dependent:?}")]
    SingularDesign { dependent: Vec<String> },
    #[error("SMO did not converge after {iterations} iterations (KKT violation {kkt_violation:.3e})")]
    Convergence { iterations: usize, kkt_violation: f64 },
    #[error("model document: {0}")]
    Document(String),
}

/// Checks shape and finiteness of a training set; returns the feature count.
pub(crate) fn check_design(x: &[Vec<f64>], y: &[f64], feature_names: &[String]) -> Result<usize, ModelError> {
    if x.is_empty() {
        return Err(ModelError::Parameter("no training rows".into()));
    }
    if x.len() != y.len() {
        return Err(ModelError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = feature_names.len();
    if d == 0 {
        return Err(ModelError::Parameter("no features".into()));
    }
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(ModelError::DimensionMismatch {
            expected: d,
            got: row.len(),
        });
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(ModelError::Parameter("training data must be finite".into()));
    }
    Ok(d)
}

/// A fitted model of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FittedModel {
    Lr(LrModel),
    Svr(SvrModel),
}

impl FittedModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64, ModelError> {
        match self {
            FittedModel::Lr(m) => predict_lr(m, x),
            FittedModel::Svr(m) => predict_svr(m, x),
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            FittedModel::Lr(m) => &m.feature_names,
            FittedModel::Svr(m) => &m.feature_names,
        }
    }

    /// Versioned JSON document.
    pub fn to_json(&self) -> Result<String, ModelError> {
        let doc = ModelDocument {
            schema_version: MODEL_SCHEMA_VERSION,
            model: self.clone(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| ModelError::Document(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| ModelError::Document(e.to_string()))?;
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(ModelError::Document(format!(
                "unsupported schema version {}",
                doc.schema_version
            )));
        }
        Ok(doc.model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    schema_version: u32,
    model: FittedModel,
}
