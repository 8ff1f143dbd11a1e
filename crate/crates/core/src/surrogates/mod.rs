//! Surrogate regressors mapping the input metric vector to F-Measure:
//! Gaussian process, epsilon-SVR, feed-forward ANN and their averaging
//! ensemble, with evaluation metrics and a versioned model file format.
//!
//! All models train on the standardized scale and de-standardize public
//! predictions back to percent; predictions are not clamped to [0, 100].

mod ann;
mod gp;
mod svr;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, TrainingSet};

pub use ann::{ann_fit, AnnModel, DEFAULT_HIDDEN, DEFAULT_MAX_EPOCHS};
pub use gp::{
    gp_fit, gp_fit_with, gp_fit_with_restarts, log_marginal_likelihood, GpHyperparams, GpModel,
    JITTER_CEILING, JITTER_FLOOR,
};
pub use svr::{
    solve_dual, svr_fit, DualSolution, SvrHyperparams, SvrModel, SvrTuning, AUTO_TUNE_BUDGET,
    DEFAULT_SMO_BUDGET, KKT_TOLERANCE,
};

/// Errors from model fitting, evaluation and persistence.
#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("need at least {need} training points, got {got}")]
    TooFewPoints { got: usize, need: usize },
    #[error("kernel matrix not positive definite even with jitter up to {max_jitter}")]
    Conditioning { max_jitter: f64 },
    #[error("SMO did not converge in {iterations} iterations: KKT violation {violation}")]
    Convergence { iterations: usize, violation: f64 },
    #[error("ANN training diverged: non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("invalid hyperparameters: {0}")]
    BadHyperparams(String),
    #[error("evaluation requires equal lengths >= 2, got {pred} predictions and {actual} actuals")]
    BadEvalInput { pred: usize, actual: usize },
    #[error("RRSE undefined for constant actuals (MAE {mae:.6}, RMSE {rmse:.6})")]
    ConstantActual { mae: f64, rmse: f64 },
    #[error("model file {path}: {detail}")]
    ModelFile { path: String, detail: String },
    #[error("model format version {got} unsupported (expected {expected})")]
    VersionMismatch { got: u64, expected: u64 },
}

/// The averaging ensemble over the three member model types.
///
/// Members must be trained on the same training set so their
/// normalization statistics agree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub gp: GpModel,
    pub svr: SvrModel,
    pub ann: AnnModel,
}

impl EnsembleModel {
    /// Arithmetic mean of the member predictions (percent).
    pub fn predict(&self, x: &[f64]) -> f64 {
        (self.gp.predict(x).0 + self.svr.predict(x) + self.ann.predict(x)) / 3.0
    }
}

/// Trains all three member models on the same training set.
pub fn ensemble_fit(
    ts: &TrainingSet,
    smo_budget: usize,
    seed: u64,
) -> Result<EnsembleModel, SurrogateError> {
    Ok(EnsembleModel {
        gp: gp_fit(ts, seed)?,
        svr: svr_fit(ts, SvrTuning::Auto, smo_budget, seed)?,
        ann: ann_fit(ts, DEFAULT_HIDDEN, seed, DEFAULT_MAX_EPOCHS)?,
    })
}

/// Accuracy summary of predictions against held-out actuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    /// Root relative squared error; 1 means no better than the mean
    /// predictor.
    pub rrse: f64,
    pub mae: f64,
    pub rmse: f64,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "rrse,mae,rmse";

    pub fn csv_row(&self) -> String {
        format!("{:.6},{:.6},{:.6}", self.rrse, self.mae, self.rmse)
    }
}

/// Computes RRSE, MAE and RMSE. A constant actual vector makes RRSE
/// undefined; the error carries the still-valid MAE and RMSE.
pub fn evaluate(pred: &[f64], actual: &[f64]) -> Result<EvalReport, SurrogateError> {
    if pred.len() != actual.len() || pred.len() < 2 {
        return Err(SurrogateError::BadEvalInput {
            pred: pred.len(),
            actual: actual.len(),
        });
    }
    let n = pred.len() as f64;
    let mae = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).abs())
        .sum::<f64>()
        / n;
    let sq_err: f64 = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    let rmse = (sq_err / n).sqrt();
    let mean = actual.iter().sum::<f64>() / n;
    let sq_dev: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if sq_dev == 0.0 {
        return Err(SurrogateError::ConstantActual { mae, rmse });
    }
    Ok(EvalReport {
        rrse: (sq_err / sq_dev).sqrt(),
        mae,
        rmse,
    })
}

/// Version tag written into model files.
pub const MODEL_FORMAT_VERSION: u64 = 1;

/// Any trained surrogate, tagged for serialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Model {
    Gp(GpModel),
    Svr(SvrModel),
    Ann(AnnModel),
    Ensemble(EnsembleModel),
}

impl Model {
    /// Point prediction in percent (the GP's posterior mean).
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Model::Gp(m) => m.predict(x).0,
            Model::Svr(m) => m.predict(x),
            Model::Ann(m) => m.predict(x),
            Model::Ensemble(m) => m.predict(x),
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Model::Gp(_) => "gp",
            Model::Svr(_) => "svr",
            Model::Ann(_) => "ann",
            Model::Ensemble(_) => "ensemble",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u64,
    model: Model,
}

/// Writes a model as versioned, self-describing JSON text.
pub fn save_model<P: AsRef<Path>>(model: &Model, path: P) -> Result<(), SurrogateError> {
    let path = path.as_ref();
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| SurrogateError::ModelFile {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| SurrogateError::ModelFile {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

/// Loads a model written by [`save_model`], checking the format version.
pub fn load_model<P: AsRef<Path>>(path: P) -> Result<Model, SurrogateError> {
    let path = path.as_ref();
    let wrap = |detail: String| SurrogateError::ModelFile {
        path: path.display().to_string(),
        detail,
    };
    let text = fs::read_to_string(path).map_err(|e| wrap(e.to_string()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| wrap(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| wrap("missing format_version field".into()))?;
    if version != MODEL_FORMAT_VERSION {
        return Err(SurrogateError::VersionMismatch {
            got: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| wrap(e.to_string()))?;
    Ok(file.model)
}
