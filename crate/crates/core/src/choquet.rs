//! Discrete Choquet integral and per-source min-max normalization.

use serde::{Deserialize, Serialize};

use crate::error::{MimrfError, Result};
use crate::fuzzy_measure::FuzzyMeasure;

/// Evaluates the discrete Choquet integral of `x` under `measure`.
///
/// Sources are sorted descending by value (ties broken by ascending source
/// index) and the telescoped differences are weighted by the measure of the
/// growing top-k subset. The result always lies in `[min(x), max(x)]`.
pub fn choquet_integral(measure: &FuzzyMeasure, x: &[f64]) -> Result<f64> {
    let m = measure.num_sources();
    if x.len() != m {
        return Err(MimrfError::contract(format!(
            "input has {} entries but the measure covers {m} sources",
            x.len()
        )));
    }
    for (k, &v) in x.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(MimrfError::contract(format!(
                "source value {v} at index {k} is outside [0, 1]; normalize inputs first"
            )));
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).expect("values are finite").then(a.cmp(&b)));

    let mut sum = 0.0;
    let mut prefix: u32 = 0;
    for (k, &idx) in order.iter().enumerate() {
        prefix |= 1 << idx;
        let next = if k + 1 < m { x[order[k + 1]] } else { 0.0 };
        sum += (x[idx] - next) * measure.value(prefix);
    }
    Ok(sum)
}

/// Per-source min/max learned from training data, used to map raw source
/// values into `[0, 1]` before fusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceScaler {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl SourceScaler {
    /// Scaler that leaves values in `[0, 1]` untouched, for data that is
    /// already normalized.
    pub fn identity(num_sources: usize) -> Self {
        SourceScaler {
            mins: vec![0.0; num_sources],
            maxs: vec![1.0; num_sources],
        }
    }

    /// Learns per-source min/max from training values. A constant source
    /// (min = max) is recorded as degenerate and maps everything to 0.5.
    pub fn fit(training_values: &[Vec<f64>]) -> Result<Self> {
        if training_values.is_empty() {
            return Err(MimrfError::contract("no sources to fit a scaler on"));
        }
        let mut mins = Vec::with_capacity(training_values.len());
        let mut maxs = Vec::with_capacity(training_values.len());
        for (k, values) in training_values.iter().enumerate() {
            if values.is_empty() {
                return Err(MimrfError::contract(format!(
                    "source {k} has no training values"
                )));
            }
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &v in values {
                if !v.is_finite() {
                    return Err(MimrfError::contract(format!(
                        "non-finite training value {v} for source {k}"
                    )));
                }
                lo = lo.min(v);
                hi = hi.max(v);
            }
            mins.push(lo);
            maxs.push(hi);
        }
        Ok(SourceScaler { mins, maxs })
    }

    pub fn num_sources(&self) -> usize {
        self.mins.len()
    }

    pub fn mins(&self) -> &[f64] {
        &self.mins
    }

    pub fn maxs(&self) -> &[f64] {
        &self.maxs
    }

    /// `(raw - min) / (max - min)` clipped to `[0, 1]`; degenerate sources
    /// map to 0.5.
    pub fn apply(&self, source: usize, raw: f64) -> f64 {
        let (lo, hi) = (self.mins[source], self.maxs[source]);
        if lo == hi {
            return 0.5;
        }
        ((raw - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    /// Applies the scaler to a full source vector.
    pub fn apply_vector(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.num_sources() {
            return Err(MimrfError::contract(format!(
                "vector has {} entries but the scaler covers {} sources",
                raw.len(),
                self.num_sources()
            )));
        }
        Ok(raw
            .iter()
            .enumerate()
            .map(|(k, &v)| self.apply(k, v))
            .collect())
    }
}
