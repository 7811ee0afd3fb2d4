//! Helpers for turning raw measurements into normalized fusion sources,
//! including the exponential distance-to-confidence transform.

use std::fs;
use std::path::Path;

use crate::error::{MimrfError, Result};

/// Per-point confidences in `(0, 1]` with a tag recording how they were
/// produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    pub confidences: Vec<f64>,
    pub provenance: String,
}

/// Maps nonnegative distances to confidences via `c = exp(-d / 2)`, so a
/// zero distance yields confidence 1 and confidence decays strictly with
/// distance.
pub fn distance_confidence(distances: &[f64]) -> Result<ConfidenceMap> {
    for (i, &d) in distances.iter().enumerate() {
        if !d.is_finite() || d < 0.0 {
            return Err(MimrfError::contract(format!(
                "distance {d} at index {i} must be finite and >= 0"
            )));
        }
    }
    Ok(ConfidenceMap {
        confidences: distances.iter().map(|d| (-d / 2.0).exp()).collect(),
        provenance: "exp(-d/2)".to_string(),
    })
}

/// 1-D Euclidean distance of each value to a reference peak: `|value - peak|`.
pub fn peak_distances(values: &[f64], peak: f64) -> Result<Vec<f64>> {
    if !peak.is_finite() {
        return Err(MimrfError::contract(format!("peak {peak} must be finite")));
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(MimrfError::contract(format!(
                "value {v} at index {i} must be finite"
            )));
        }
    }
    Ok(values.iter().map(|v| (v - peak).abs()).collect())
}

/// Reads a delimited text column of `point_id<TAB>value` rows. Lines
/// starting with `#` are comments; the first non-comment line is a header.
pub fn read_value_column(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MimrfError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        let mut parts = line.split('\t');
        let id = parts.next().unwrap_or_default();
        let value = parts
            .next()
            .ok_or_else(|| {
                MimrfError::parse(format!("{}:{}: missing value column", path.display(), lineno + 1))
            })?
            .parse::<f64>()
            .map_err(|e| {
                MimrfError::parse(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
        rows.push((id.to_string(), value));
    }
    Ok(rows)
}

/// Writes `point_id<TAB>confidence` rows with a header and `#` comment lines
/// carrying provenance.
pub fn write_confidence_column(
    path: impl AsRef<Path>,
    rows: &[(String, f64)],
    provenance: &str,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&format!("# provenance: {provenance}\n"));
    out.push_str("point_id\tconfidence\n");
    for (id, c) in rows {
        // 17 significant digits round-trips f64 exactly
        out.push_str(&format!("{id}\t{c:.16e}\n"));
    }
    fs::write(path, out).map_err(|source| MimrfError::Io {
        path: path.display().to_string(),
        source,
    })
}
