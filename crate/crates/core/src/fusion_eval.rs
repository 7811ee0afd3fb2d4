//! Test-time fusion under a trained measure and scoring (ROC, AUC with an
//! optional false-alarm-rate cutoff, RMSE).

use serde::{Deserialize, Serialize};

use crate::choquet::{choquet_integral, SourceScaler};
use crate::error::{MimrfError, Result};
use crate::fuzzy_measure::FuzzyMeasure;
use crate::mil_data::CandidateSet;

/// How an instance's candidate fused values collapse to one confidence.
/// Training selects candidates by the bag label, but test data is unlabeled;
/// the default `Max` treats the fused value as a target-favoring confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    #[default]
    Max,
    Min,
    /// Mean fused value over candidates; the recorded selection is the
    /// argmax.
    Mean,
}

impl std::str::FromStr for SelectionMode {
    type Err = MimrfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(SelectionMode::Max),
            "min" => Ok(SelectionMode::Min),
            "mean" => Ok(SelectionMode::Mean),
            other => Err(MimrfError::contract(format!(
                "unknown selection mode '{other}' (expected max, min, or mean)"
            ))),
        }
    }
}

impl std::fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SelectionMode::Max => "max",
            SelectionMode::Min => "min",
            SelectionMode::Mean => "mean",
        })
    }
}

/// Fused confidence for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionEntry {
    pub instance_id: String,
    pub confidence: f64,
    pub selected_candidate: usize,
}

/// Per-instance fusion output, aligned with the input instance order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionResult {
    pub mode: SelectionMode,
    pub entries: Vec<FusionEntry>,
}

/// Fuses every instance: normalizes each candidate with the scaler,
/// evaluates the Choquet integral, and aggregates per `mode`.
pub fn fuse(
    measure: &FuzzyMeasure,
    scaler: &SourceScaler,
    instances: &[CandidateSet],
    mode: SelectionMode,
) -> Result<FusionResult> {
    if scaler.num_sources() != measure.num_sources() {
        return Err(MimrfError::contract(format!(
            "scaler covers {} sources but the measure covers {}",
            scaler.num_sources(),
            measure.num_sources()
        )));
    }
    let mut entries = Vec::with_capacity(instances.len());
    for inst in instances {
        if inst.candidates.is_empty() {
            return Err(MimrfError::contract(format!(
                "instance {} has no candidates",
                inst.instance_id
            )));
        }
        let mut cis = Vec::with_capacity(inst.candidates.len());
        for cand in &inst.candidates {
            let normalized = scaler.apply_vector(cand)?;
            cis.push(choquet_integral(measure, &normalized)?);
        }
        let argmax = extremal_index(&cis, true);
        let (confidence, selected_candidate) = match mode {
            SelectionMode::Max => (cis[argmax], argmax),
            SelectionMode::Min => {
                let i = extremal_index(&cis, false);
                (cis[i], i)
            }
            SelectionMode::Mean => (cis.iter().sum::<f64>() / cis.len() as f64, argmax),
        };
        entries.push(FusionEntry {
            instance_id: inst.instance_id.clone(),
            confidence,
            selected_candidate,
        });
    }
    Ok(FusionResult { mode, entries })
}

fn extremal_index(values: &[f64], take_max: bool) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if (take_max && v > values[best]) || (!take_max && v < values[best]) {
            best = i;
        }
    }
    best
}

/// ROC curve, AUC, and optional FAR-truncated AUC.
#[derive(Debug, Clone, Serialize)]
pub struct RocReport {
    /// (false-positive-rate, true-positive-rate) points from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    /// Trapezoidal area under the full curve.
    pub auc: f64,
    /// Raw (unrescaled) area under the curve for FPR up to the cutoff.
    pub auc_far_cutoff: Option<f64>,
}

/// Builds the ROC by a threshold sweep over the sorted unique confidence
/// values (ties grouped) and integrates the AUC by trapezoid.
pub fn roc_auc(confidences: &[f64], truth: &[bool], far_cutoff: Option<f64>) -> Result<RocReport> {
    if confidences.len() != truth.len() {
        return Err(MimrfError::contract(format!(
            "{} confidences vs {} truth labels",
            confidences.len(),
            truth.len()
        )));
    }
    let n_pos = truth.iter().filter(|&&t| t).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MimrfError::contract(
            "ROC needs at least one positive and one negative instance",
        ));
    }
    if let Some(v) = confidences.iter().find(|v| !v.is_finite()) {
        return Err(MimrfError::contract(format!("non-finite confidence {v}")));
    }

    let mut scored: Vec<(f64, bool)> = confidences.iter().cloned().zip(truth.iter().cloned()).collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));

    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < scored.len() {
        let threshold = scored[i].0;
        while i < scored.len() && scored[i].0 == threshold {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }

    let auc = trapezoid_area(&points, 1.0);
    let auc_far_cutoff = far_cutoff.map(|cutoff| trapezoid_area(&points, cutoff));
    Ok(RocReport {
        points,
        auc,
        auc_far_cutoff,
    })
}

// Area under the piecewise-linear curve for FPR in [0, limit]; the segment
// crossing the limit is split by linear interpolation.
fn trapezoid_area(points: &[(f64, f64)], limit: f64) -> f64 {
    let mut area = 0.0;
    for w in points.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if x0 >= limit {
            break;
        }
        if x1 <= limit {
            area += (x1 - x0) * (y0 + y1) / 2.0;
        } else {
            let t = (limit - x0) / (x1 - x0);
            let y_at = y0 + t * (y1 - y0);
            area += (limit - x0) * (y0 + y_at) / 2.0;
            break;
        }
    }
    area
}

/// Root mean square error between confidences and real-valued truth.
pub fn rmse(confidences: &[f64], truth: &[f64]) -> Result<f64> {
    if confidences.is_empty() {
        return Err(MimrfError::contract("rmse of empty input"));
    }
    if confidences.len() != truth.len() {
        return Err(MimrfError::contract(format!(
            "{} confidences vs {} truth values",
            confidences.len(),
            truth.len()
        )));
    }
    let sum_sq: f64 = confidences
        .iter()
        .zip(truth)
        .map(|(c, y)| (c - y) * (c - y))
        .sum();
    Ok((sum_sq / confidences.len() as f64).sqrt())
}

/// Marks instances where two fusion runs selected different candidates. The
/// mask supports edge-restricted scoring (score only where it is true).
pub fn selection_diff(result: &FusionResult, reference: &FusionResult) -> Result<Vec<bool>> {
    if result.entries.len() != reference.entries.len() {
        return Err(MimrfError::contract(format!(
            "{} vs {} entries",
            result.entries.len(),
            reference.entries.len()
        )));
    }
    result
        .entries
        .iter()
        .zip(&reference.entries)
        .map(|(a, b)| {
            if a.instance_id != b.instance_id {
                return Err(MimrfError::contract(format!(
                    "misaligned instance ids: {} vs {}",
                    a.instance_id, b.instance_id
                )));
            }
            Ok(a.selected_candidate != b.selected_candidate)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    // Mann-Whitney oracle: fraction of correctly ordered positive-negative
    // pairs, ties counted 1/2.
    fn pairwise_auc(confidences: &[f64], truth: &[bool]) -> f64 {
        let mut correct = 0.0;
        let mut pairs = 0.0;
        for (i, &ti) in truth.iter().enumerate() {
            if !ti {
                continue;
            }
            for (j, &tj) in truth.iter().enumerate() {
                if tj {
                    continue;
                }
                pairs += 1.0;
                if confidences[i] > confidences[j] {
                    correct += 1.0;
                } else if confidences[i] == confidences[j] {
                    correct += 0.5;
                }
            }
        }
        correct / pairs
    }

    fn instance(id: &str, candidates: Vec<Vec<f64>>) -> CandidateSet {
        CandidateSet {
            instance_id: id.into(),
            candidates,
        }
    }

    #[test]
    fn fuse_modes_pick_extrema() {
        let g = FuzzyMeasure::new(1, vec![1.0]).unwrap();
        let s = SourceScaler::identity(1);
        let insts = vec![instance("a", vec![vec![0.2], vec![0.8]])];
        let max = fuse(&g, &s, &insts, SelectionMode::Max).unwrap();
        assert_eq!(max.entries[0].confidence, 0.8);
        assert_eq!(max.entries[0].selected_candidate, 1);
        let min = fuse(&g, &s, &insts, SelectionMode::Min).unwrap();
        assert_eq!(min.entries[0].confidence, 0.2);
        assert_eq!(min.entries[0].selected_candidate, 0);
        let mean = fuse(&g, &s, &insts, SelectionMode::Mean).unwrap();
        assert!((mean.entries[0].confidence - 0.5).abs() < 1e-15);
        assert_eq!(mean.entries[0].selected_candidate, 1);
    }

    #[test]
    fn fuse_single_candidate_ignores_mode() {
        let g = FuzzyMeasure::max_operator(2);
        let s = SourceScaler::identity(2);
        let insts = vec![instance("a", vec![vec![0.3, 0.1]])];
        for mode in [SelectionMode::Max, SelectionMode::Min, SelectionMode::Mean] {
            let r = fuse(&g, &s, &insts, mode).unwrap();
            assert!((r.entries[0].confidence - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn fuse_confidences_bounded_by_inputs() {
        let g = FuzzyMeasure::max_operator(3);
        let s = SourceScaler::identity(3);
        let insts = vec![
            instance("a", vec![vec![0.1, 0.2, 0.3], vec![0.3, 0.3, 0.05]]),
            instance("b", vec![vec![0.25, 0.0, 0.1]]),
        ];
        let r = fuse(&g, &s, &insts, SelectionMode::Max).unwrap();
        for e in &r.entries {
            assert!(e.confidence <= 0.3 + 1e-15);
        }
    }

    #[test]
    fn fuse_rejects_dimension_mismatch() {
        let g = FuzzyMeasure::max_operator(2);
        let s = SourceScaler::identity(3);
        assert!(fuse(&g, &s, &[], SelectionMode::Max).is_err());
    }

    #[test]
    fn roc_perfect_separation() {
        let report = roc_auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false], None).unwrap();
        assert_eq!(report.auc, 1.0);
        assert_eq!(report.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(report.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn roc_constant_confidences_are_chance() {
        let report = roc_auc(&[0.5, 0.5, 0.5, 0.5], &[true, false, true, false], None).unwrap();
        assert_eq!(report.auc, 0.5);
        assert_eq!(report.points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn roc_hand_case_three_quarters() {
        // 3 of 4 positive-negative pairs correctly ordered
        let report = roc_auc(&[0.9, 0.8, 0.4, 0.3], &[true, false, true, false], None).unwrap();
        assert!((report.auc - 0.75).abs() < 1e-15);
    }

    #[test]
    fn roc_rejects_single_class() {
        assert!(roc_auc(&[0.1, 0.9], &[true, true], None).is_err());
    }

    #[test]
    fn far_cutoff_truncates_raw_area() {
        let confidences = [0.9, 0.8, 0.4, 0.3];
        let truth = [true, false, true, false];
        let full = roc_auc(&confidences, &truth, Some(1.0)).unwrap();
        assert!((full.auc_far_cutoff.unwrap() - full.auc).abs() < 1e-15);
        let half = roc_auc(&confidences, &truth, Some(0.5)).unwrap();
        // curve: (0,0) -> (0,.5) -> (.5,.5) -> (.5,1) -> (1,1)
        assert!((half.auc_far_cutoff.unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rmse_hand_cases() {
        assert_eq!(rmse(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!((rmse(&[0.5, 0.5], &[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn selection_diff_masks() {
        let a = FusionResult {
            mode: SelectionMode::Max,
            entries: vec![
                FusionEntry { instance_id: "x".into(), confidence: 0.5, selected_candidate: 0 },
                FusionEntry { instance_id: "y".into(), confidence: 0.5, selected_candidate: 1 },
            ],
        };
        let mut b = a.clone();
        assert_eq!(selection_diff(&a, &b).unwrap(), vec![false, false]);
        b.entries[1].selected_candidate = 2;
        assert_eq!(selection_diff(&a, &b).unwrap(), vec![false, true]);
        b.entries[0].instance_id = "z".into();
        assert!(selection_diff(&a, &b).is_err());
    }

    #[test]
    fn masked_scoring_equals_subset_scoring() {
        let confidences = [0.9, 0.2, 0.7, 0.4, 0.6, 0.1];
        let truth = [true, false, true, false, true, false];
        let mask = [true, true, false, true, true, false];
        let (mc, mt): (Vec<f64>, Vec<bool>) = confidences
            .iter()
            .zip(&truth)
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|((c, t), _)| (*c, *t))
            .unzip();
        let masked = roc_auc(&mc, &mt, None).unwrap();
        let direct = roc_auc(&[0.9, 0.2, 0.4, 0.6], &[true, false, false, true], None).unwrap();
        assert_eq!(masked.auc, direct.auc);
    }

    proptest! {
        #[test]
        fn auc_matches_mann_whitney(seed in 0u64..200) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let n = rng.gen_range(4..120);
            let confidences: Vec<f64> =
                (0..n).map(|_| (rng.gen::<f64>() * 8.0).round() / 8.0).collect();
            let mut truth: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            truth[0] = true;
            truth[1] = false;
            let report = roc_auc(&confidences, &truth, None).unwrap();
            let oracle = pairwise_auc(&confidences, &truth);
            prop_assert!((report.auc - oracle).abs() < 1e-10);
        }

        #[test]
        fn roc_points_are_monotone(seed in 0u64..100) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let n = rng.gen_range(4..60);
            let confidences: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let mut truth: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            truth[0] = true;
            truth[1] = false;
            let report = roc_auc(&confidences, &truth, None).unwrap();
            for w in report.points.windows(2) {
                prop_assert!(w[1].0 >= w[0].0);
                prop_assert!(w[1].1 >= w[0].1);
            }
        }

        #[test]
        fn rmse_triangle_bound(seed in 0u64..100) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..40);
            let a: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let ac = rmse(&a, &c).unwrap();
            let ab = rmse(&a, &b).unwrap();
            let bc = rmse(&b, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
