//! Delimited-text exports: confidence files, ROC point files, truth
//! sidecars. All writes go through write-then-rename so a failed command
//! never leaves a partial output behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mimrf::FusionResult;

/// Writes `content` to `path` atomically.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Confidence export: `#`-prefixed provenance lines, a header row, then one
/// `instance_id<TAB>confidence<TAB>selected_candidate` row per instance.
pub fn write_confidence_file(
    path: &Path,
    result: &FusionResult,
    provenance: &[String],
) -> Result<()> {
    let mut out = String::new();
    for line in provenance {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str("instance_id\tconfidence\tselected_candidate\n");
    for e in &result.entries {
        out.push_str(&format!(
            "{}\t{:.16e}\t{}\n",
            e.instance_id, e.confidence, e.selected_candidate
        ));
    }
    write_atomic(path, &out)
}

/// Reads a confidence export back as `(instance_id, confidence)` rows.
pub fn read_confidence_file(path: &Path) -> Result<Vec<(String, f64)>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
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
        let id = match parts.next() {
            Some(id) if !id.is_empty() => id,
            _ => bail!("{}:{}: missing instance_id", path.display(), lineno + 1),
        };
        let confidence: f64 = parts
            .next()
            .with_context(|| format!("{}:{}: missing confidence", path.display(), lineno + 1))?
            .parse()
            .with_context(|| format!("{}:{}: bad confidence", path.display(), lineno + 1))?;
        rows.push((id.to_string(), confidence));
    }
    if rows.is_empty() {
        bail!("{}: no confidence rows", path.display());
    }
    Ok(rows)
}

/// ROC points as `fpr<TAB>tpr` rows for external plotting.
pub fn write_roc_file(path: &Path, points: &[(f64, f64)], provenance: &[String]) -> Result<()> {
    let mut out = String::new();
    for line in provenance {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str("fpr\ttpr\n");
    for (fpr, tpr) in points {
        out.push_str(&format!("{fpr:.16e}\t{tpr:.16e}\n"));
    }
    write_atomic(path, &out)
}

/// Truth sidecar: a JSON object mapping instance id to truth value.
pub fn read_truth_file(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_truth_file(path: &Path, truth: &BTreeMap<String, f64>) -> Result<()> {
    let text = serde_json::to_string_pretty(truth)?;
    write_atomic(path, &text)
}
