//! Trained-model file: the learned measure bundled with the scaler, the
//! optimizer parameters, and a summary of the run.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::choquet::SourceScaler;
use crate::ea::{EAParams, TrainOutcome};
use crate::error::{MimrfError, Result};
use crate::fuzzy_measure::FuzzyMeasure;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedModel {
    pub format_version: u32,
    pub measure: FuzzyMeasure,
    pub scaler: SourceScaler,
    pub params: EAParams,
    pub iterations: usize,
    /// Iteration at which the stop threshold fired, if before the cap.
    pub converged_at: Option<usize>,
    pub final_objective: f64,
}

impl TrainedModel {
    /// Deterministic summary of a training run; wall time is deliberately
    /// excluded so identical runs produce byte-identical files.
    pub fn from_outcome(outcome: &TrainOutcome, params: &EAParams) -> Self {
        TrainedModel {
            format_version: MODEL_FORMAT_VERSION,
            measure: outcome.measure.clone(),
            scaler: outcome.scaler.clone(),
            params: params.clone(),
            iterations: outcome.trace.num_iterations(),
            converged_at: outcome.trace.converged_at,
            final_objective: outcome.trace.final_objective(),
        }
    }
}

/// Writes the model atomically (write-then-rename) so a failed run never
/// leaves a partial file behind.
pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(model).expect("model serializes");
    let tmp = path.with_extension("tmp");
    let io_err = |source| MimrfError::Io {
        path: path.display().to_string(),
        source,
    };
    fs::write(&tmp, text).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MimrfError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let model: TrainedModel = serde_json::from_str(&text)
        .map_err(|e| MimrfError::parse(format!("{}: {e}", path.display())))?;
    if model.format_version != MODEL_FORMAT_VERSION {
        return Err(MimrfError::parse(format!(
            "{}: unsupported model format_version {}",
            path.display(),
            model.format_version
        )));
    }
    if model.scaler.num_sources() != model.measure.num_sources() {
        return Err(MimrfError::parse(format!(
            "{}: scaler covers {} sources but the measure covers {}",
            path.display(),
            model.scaler.num_sources(),
            model.measure.num_sources()
        )));
    }
    Ok(model)
}
