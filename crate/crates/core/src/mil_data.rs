//! Data model for multi-resolution MIL datasets: labeled bags of instances,
//! each instance carrying a set of candidate source vectors (one per possible
//! cross-resolution correspondence), plus a synthetic scenario generator.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::choquet::{choquet_integral, SourceScaler};
use crate::error::{MimrfError, Result};
use crate::fuzzy_measure::FuzzyMeasure;

/// Candidate source vectors for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSet {
    pub instance_id: String,
    pub candidates: Vec<Vec<f64>>,
}

/// A labeled MIL bag. The label is 0 or 1 in the binary setting, or any
/// value in `[0, 1]` for the real-valued generalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bag {
    pub bag_id: String,
    pub label: f64,
    pub instances: Vec<CandidateSet>,
}

/// A full training or test dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub format_version: u32,
    pub num_sources: usize,
    pub bags: Vec<Bag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<SourceScaler>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normalized: bool,
}

pub const FORMAT_VERSION: u32 = 1;

impl Dataset {
    /// Checks structural invariants: candidate presence, dimension
    /// uniformity, and labels in `[0, 1]`. Errors name the offending bag and
    /// instance.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(MimrfError::parse(format!(
                "unsupported format_version {}, expected {FORMAT_VERSION}",
                self.format_version
            )));
        }
        if self.num_sources == 0 {
            return Err(MimrfError::parse("num_sources must be >= 1"));
        }
        for (b, bag) in self.bags.iter().enumerate() {
            if !(0.0..=1.0).contains(&bag.label) {
                return Err(MimrfError::parse(format!(
                    "bag {b} ({}): label {} outside [0, 1]",
                    bag.bag_id, bag.label
                )));
            }
            if bag.instances.is_empty() {
                return Err(MimrfError::parse(format!(
                    "bag {b} ({}): has no instances",
                    bag.bag_id
                )));
            }
            for (i, inst) in bag.instances.iter().enumerate() {
                if inst.candidates.is_empty() {
                    return Err(MimrfError::parse(format!(
                        "bag {b} ({}), instance {i} ({}): empty candidate set",
                        bag.bag_id, inst.instance_id
                    )));
                }
                for (c, cand) in inst.candidates.iter().enumerate() {
                    if cand.len() != self.num_sources {
                        return Err(MimrfError::parse(format!(
                            "bag {b} ({}), instance {i} ({}), candidate {c}: \
                             {} values, expected {}",
                            bag.bag_id,
                            inst.instance_id,
                            cand.len(),
                            self.num_sources
                        )));
                    }
                    if let Some(v) = cand.iter().find(|v| !v.is_finite()) {
                        return Err(MimrfError::parse(format!(
                            "bag {b} ({}), instance {i} ({}), candidate {c}: \
                             non-finite value {v}",
                            bag.bag_id, inst.instance_id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// True when the dataset has at least one bag labeled exactly 0 and one
    /// labeled exactly 1.
    pub fn has_both_binary_classes(&self) -> bool {
        self.bags.iter().any(|b| b.label == 0.0) && self.bags.iter().any(|b| b.label == 1.0)
    }

    pub fn num_instances(&self) -> usize {
        self.bags.iter().map(|b| b.instances.len()).sum()
    }

    /// Returns a normalized copy: a min-max scaler fitted on every candidate
    /// value of each source, applied throughout. Already-normalized datasets
    /// are returned as-is.
    pub fn normalize(&self) -> Result<Dataset> {
        if self.normalized {
            return Ok(self.clone());
        }
        let mut per_source: Vec<Vec<f64>> = vec![Vec::new(); self.num_sources];
        for bag in &self.bags {
            for inst in &bag.instances {
                for cand in &inst.candidates {
                    for (k, &v) in cand.iter().enumerate() {
                        per_source[k].push(v);
                    }
                }
            }
        }
        let scaler = SourceScaler::fit(&per_source)?;
        let mut out = self.clone();
        for bag in &mut out.bags {
            for inst in &mut bag.instances {
                for cand in &mut inst.candidates {
                    *cand = scaler.apply_vector(cand)?;
                }
            }
        }
        out.scaler = Some(scaler);
        out.normalized = true;
        Ok(out)
    }
}

/// Loads and validates a bag-dataset document.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MimrfError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let dataset: Dataset = serde_json::from_str(&text)
        .map_err(|e| MimrfError::parse(format!("{}: {e}", path.display())))?;
    dataset.validate()?;
    Ok(dataset)
}

/// Loads a bag-dataset document without structural validation, so callers
/// can patch known defects (e.g. empty candidate sets) before validating.
pub fn load_dataset_lenient(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MimrfError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| MimrfError::parse(format!("{}: {e}", path.display())))
}

/// Replaces every empty candidate set with a single constant-valued vector.
/// Upstream data preparation is normally responsible for patching missing
/// correspondences; this is the fallback behind the CLI preprocessing flag.
pub fn fill_empty_candidates(dataset: &mut Dataset, fill_value: f64) -> usize {
    let m = dataset.num_sources;
    let mut patched = 0;
    for bag in &mut dataset.bags {
        for inst in &mut bag.instances {
            if inst.candidates.is_empty() {
                inst.candidates.push(vec![fill_value; m]);
                patched += 1;
            }
        }
    }
    patched
}

/// Writes a dataset document. Reals keep full round-trip precision.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(dataset).expect("dataset serializes");
    fs::write(path, text).map_err(|source| MimrfError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Instance-level ground truth, keyed by instance id. Used for scoring only.
pub type TruthMap = BTreeMap<String, f64>;

/// Generating measure choice for the synthesizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratingMeasure {
    /// A fresh random monotone measure.
    #[default]
    Random,
    /// All elements 1 (Choquet integral = componentwise max).
    MaxOperator,
    /// Only the full set 1 (Choquet integral = componentwise min).
    MinOperator,
    /// Explicit ascending-bitmask value vector.
    Explicit { values: Vec<f64> },
}

/// Configuration for [`synthesize_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub num_sources: usize,
    pub num_positive_bags: usize,
    pub num_negative_bags: usize,
    pub instances_per_bag: usize,
    pub candidates_per_instance: usize,
    /// Target fraction of truth-positive instances inside positive bags.
    #[serde(default = "default_positive_fraction")]
    pub positive_fraction: f64,
    /// Probability that each non-designated candidate is replaced by noise.
    #[serde(default)]
    pub corruption_rate: f64,
    /// Half-width of the jitter on each correct candidate's fused value.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub measure: GeneratingMeasure,
    /// Draw real-valued bag labels in `[0, 1]` instead of binary ones.
    #[serde(default)]
    pub real_valued_labels: bool,
}

fn default_positive_fraction() -> f64 {
    0.5
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.num_sources == 0 {
            return Err(MimrfError::contract("num_sources must be >= 1"));
        }
        if self.num_positive_bags == 0 || self.num_negative_bags == 0 {
            return Err(MimrfError::contract(
                "need at least one positive and one negative bag",
            ));
        }
        if self.instances_per_bag == 0 || self.candidates_per_instance == 0 {
            return Err(MimrfError::contract(
                "instances_per_bag and candidates_per_instance must be >= 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.positive_fraction)
            || !(0.0..=1.0).contains(&self.corruption_rate)
            || !(0.0..=1.0).contains(&self.noise)
        {
            return Err(MimrfError::contract(
                "positive_fraction, corruption_rate, and noise must be in [0, 1]",
            ));
        }
        Ok(())
    }

    fn resolve_measure<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<FuzzyMeasure> {
        match &self.measure {
            GeneratingMeasure::Random => FuzzyMeasure::random_monotone(self.num_sources, rng),
            GeneratingMeasure::MaxOperator => Ok(FuzzyMeasure::max_operator(self.num_sources)),
            GeneratingMeasure::MinOperator => Ok(FuzzyMeasure::min_operator(self.num_sources)),
            GeneratingMeasure::Explicit { values } => {
                FuzzyMeasure::new(self.num_sources, values.clone())
            }
        }
    }
}

/// Builds a candidate vector whose Choquet integral under `measure` equals
/// `target`, moving as few components of a random shape as possible.
///
/// Components are visited in a shuffled order; one whose range can bracket
/// the target is bisected, one that moves the integral toward the target is
/// railed to its extreme, and one that does not affect the integral keeps
/// its uniform draw. Sources the measure ignores therefore stay
/// uninformative instead of tracking the target.
fn candidate_with_ci<R: Rng + ?Sized>(
    measure: &FuzzyMeasure,
    target: f64,
    rng: &mut R,
) -> Vec<f64> {
    let m = measure.num_sources();
    let mut x: Vec<f64> = (0..m).map(|_| rng.gen()).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);

    let eval = |x: &[f64]| choquet_integral(measure, x).expect("values stay in [0, 1]");
    // railing a component may unlock progress on one visited earlier, so
    // sweep until a bisection lands; m sweeps always suffice because each
    // incomplete sweep rails at least one more component toward the target
    for _ in 0..m {
        let mut current = eval(&x);
        let mut moved = false;
        for &i in &order {
            let original = x[i];
            x[i] = 0.0;
            let lo_ci = eval(&x);
            x[i] = 1.0;
            let hi_ci = eval(&x);
            if (lo_ci..=hi_ci).contains(&target) {
                // bisect this component alone: sup{ v : CI <= target }
                let (mut lo, mut hi) = (0.0f64, 1.0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    x[i] = mid;
                    if eval(&x) <= target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                x[i] = lo;
                return x;
            }
            if hi_ci < target && hi_ci > current {
                x[i] = 1.0; // rail upward: progress but not enough yet
                current = hi_ci;
                moved = true;
            } else if lo_ci > target && lo_ci < current {
                x[i] = 0.0; // rail downward
                current = lo_ci;
                moved = true;
            } else {
                x[i] = original; // no effect on the integral; keep the draw
            }
        }
        if !moved {
            break;
        }
    }
    // unreachable for a monotone normalized measure (railing everything
    // spans [0, 1]); rail all components as a defensive fallback
    let extreme = if eval(&x) < target { 1.0 } else { 0.0 };
    x.iter_mut().for_each(|v| *v = extreme);
    x
}

/// Generates a dataset from a known measure along with instance-level ground
/// truth (for scoring only; never shown to training) and the measure itself.
///
/// Every candidate is built so that its fused value under the generating
/// measure lies within `noise` of the instance truth, then each candidate is
/// independently replaced by resampled uniform noise with probability
/// `corruption_rate` — so at rate 0.5 half the candidates of an instance are
/// noise in expectation, and at rate 0 every candidate is informative. Bag
/// labels follow the MIL rule: positive iff any instance is positive.
pub fn synthesize_dataset<R: Rng + ?Sized>(
    config: &SynthConfig,
    rng: &mut R,
) -> Result<(Dataset, TruthMap, FuzzyMeasure)> {
    config.validate()?;
    let measure = config.resolve_measure(rng)?;
    let m = config.num_sources;

    let mut bags = Vec::new();
    let mut truth = TruthMap::new();

    let build_instance = |bag_id: &str, idx: usize, y: f64, rng: &mut R| -> CandidateSet {
        let jitter = |rng: &mut R| {
            if config.noise > 0.0 {
                (y + rng.gen_range(-config.noise..=config.noise)).clamp(0.0, 1.0)
            } else {
                y
            }
        };
        let candidates = (0..config.candidates_per_instance)
            .map(|_| {
                if rng.gen::<f64>() < config.corruption_rate {
                    (0..m).map(|_| rng.gen()).collect()
                } else {
                    candidate_with_ci(&measure, jitter(rng), rng)
                }
            })
            .collect();
        CandidateSet {
            instance_id: format!("{bag_id}_i{idx}"),
            candidates,
        }
    };

    for b in 0..config.num_negative_bags {
        let bag_id = format!("neg_{b}");
        let label = if config.real_valued_labels {
            rng.gen_range(0.0..0.5)
        } else {
            0.0
        };
        let instances = (0..config.instances_per_bag)
            .map(|i| {
                let inst = build_instance(&bag_id, i, label, rng);
                truth.insert(inst.instance_id.clone(), label);
                inst
            })
            .collect();
        bags.push(Bag {
            bag_id,
            label,
            instances,
        });
    }

    for b in 0..config.num_positive_bags {
        let bag_id = format!("pos_{b}");
        let label = if config.real_valued_labels {
            rng.gen_range(0.5..=1.0)
        } else {
            1.0
        };
        let mut truths: Vec<f64> = (0..config.instances_per_bag)
            .map(|_| {
                if rng.gen::<f64>() < config.positive_fraction {
                    label
                } else {
                    0.0
                }
            })
            .collect();
        if truths.iter().all(|&t| t == 0.0) {
            // MIL rule: a positive bag must contain a positive instance
            let forced = rng.gen_range(0..config.instances_per_bag);
            truths[forced] = label;
        }
        let instances = (0..config.instances_per_bag)
            .map(|i| {
                let inst = build_instance(&bag_id, i, truths[i], rng);
                truth.insert(inst.instance_id.clone(), truths[i]);
                inst
            })
            .collect();
        bags.push(Bag {
            bag_id,
            label,
            instances,
        });
    }

    let dataset = Dataset {
        format_version: FORMAT_VERSION,
        num_sources: m,
        bags,
        // generated values already live in [0, 1]
        scaler: Some(SourceScaler::identity(m)),
        normalized: true,
    };
    dataset.validate()?;
    Ok((dataset, truth, measure))
}
