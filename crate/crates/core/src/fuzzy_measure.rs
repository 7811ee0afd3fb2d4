//! Monotone normalized fuzzy measures over the subset lattice of `m` sources.
//!
//! A measure stores one value per nonempty subset of `{1..m}`, encoded as a
//! bitmask (bit `k` set means source `k+1` is in the subset). The full set is
//! pinned at 1 and the empty set is implicitly 0.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{MimrfError, Result};

/// Bitmask encoding of a nonempty subset of sources.
pub type Subset = u32;

/// Range a single measure element may take without breaking monotonicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// One invariant violation found by [`FuzzyMeasure::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `g(subset) < g(covered)` for `covered ⊂ subset`.
    Monotonicity {
        smaller: Subset,
        larger: Subset,
        smaller_value: f64,
        larger_value: f64,
    },
    /// Stored value outside `[0, 1]`.
    OutOfRange { subset: Subset, value: f64 },
    /// `g(full set) != 1`.
    NotNormalized { value: f64 },
}

/// Result of validating a measure; empty means every invariant holds.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Deserialize)]
struct MeasureDoc {
    num_sources: usize,
    values: Vec<f64>,
}

/// A monotone normalized fuzzy measure on `2^m - 1` nonempty subsets.
///
/// `values[i]` holds the measure of the subset with bitmask `i + 1`, so the
/// vector is in ascending-bitmask order and the last entry is the full set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureDoc")]
pub struct FuzzyMeasure {
    num_sources: usize,
    values: Vec<f64>,
}

impl TryFrom<MeasureDoc> for FuzzyMeasure {
    type Error = MimrfError;

    fn try_from(doc: MeasureDoc) -> Result<Self> {
        FuzzyMeasure::new(doc.num_sources, doc.values)
    }
}

impl FuzzyMeasure {
    /// Builds a measure from its ascending-bitmask value vector, rejecting
    /// any input that fails validation.
    pub fn new(num_sources: usize, values: Vec<f64>) -> Result<Self> {
        if num_sources == 0 {
            return Err(MimrfError::contract("num_sources must be >= 1"));
        }
        if num_sources > 16 {
            return Err(MimrfError::contract(format!(
                "num_sources {num_sources} exceeds the practical limit of 16"
            )));
        }
        let expected = (1usize << num_sources) - 1;
        if values.len() != expected {
            return Err(MimrfError::contract(format!(
                "expected {expected} measure values for {num_sources} sources, got {}",
                values.len()
            )));
        }
        let measure = FuzzyMeasure {
            num_sources,
            values,
        };
        let report = measure.validate();
        if !report.is_ok() {
            return Err(MimrfError::contract(format!(
                "measure fails validation: {:?}",
                report.violations
            )));
        }
        Ok(measure)
    }

    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    /// Bitmask of the full source set.
    pub fn full_set(&self) -> Subset {
        ((1usize << self.num_sources) - 1) as Subset
    }

    /// Measure of `subset`; the empty set is 0 by definition.
    pub fn value(&self, subset: Subset) -> f64 {
        if subset == 0 {
            return 0.0;
        }
        self.values[(subset - 1) as usize]
    }

    /// Stored values in ascending-bitmask order (index `i` is bitmask `i+1`).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The measure acting as componentwise max: every element is 1.
    pub fn max_operator(num_sources: usize) -> Self {
        let n = (1usize << num_sources) - 1;
        FuzzyMeasure {
            num_sources,
            values: vec![1.0; n],
        }
    }

    /// The measure acting as componentwise min: only the full set is 1.
    pub fn min_operator(num_sources: usize) -> Self {
        let n = (1usize << num_sources) - 1;
        let mut values = vec![0.0; n];
        values[n - 1] = 1.0;
        FuzzyMeasure {
            num_sources,
            values,
        }
    }

    /// Additive measure from singleton weights: `g(A) = Σ_{k ∈ A} w_k`.
    /// The Choquet integral then reduces to the weighted mean.
    pub fn additive(weights: &[f64]) -> Result<Self> {
        let m = weights.len();
        if m == 0 {
            return Err(MimrfError::contract("weights must be nonempty"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(MimrfError::contract(format!(
                "singleton weights must sum to 1, got {sum}"
            )));
        }
        let n = (1usize << m) - 1;
        let mut values = vec![0.0; n];
        for mask in 1..=n {
            let mut v = 0.0;
            for (k, w) in weights.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    v += w;
                }
            }
            values[mask - 1] = v;
        }
        values[n - 1] = 1.0;
        FuzzyMeasure::new(m, values)
    }

    /// Checks normalization, range, and monotonicity over covering pairs
    /// (`B = A ∪ {one element}`), which is equivalent to the full pairwise
    /// check by transitivity.
    pub fn validate(&self) -> ValidationReport {
        self.validate_inner(false)
    }

    /// Full pairwise monotonicity check over every `A ⊆ B`; `O(4^m)`.
    pub fn validate_full(&self) -> ValidationReport {
        self.validate_inner(true)
    }

    fn validate_inner(&self, all_pairs: bool) -> ValidationReport {
        let mut violations = Vec::new();
        let full = self.full_set();
        let full_value = self.value(full);
        if full_value != 1.0 {
            violations.push(Violation::NotNormalized { value: full_value });
        }
        for mask in 1..=full {
            let v = self.value(mask);
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                violations.push(Violation::OutOfRange { subset: mask, value: v });
            }
        }
        if all_pairs {
            for small in 1..full {
                for large in (small + 1)..=full {
                    if small & large == small && self.value(small) > self.value(large) {
                        violations.push(Violation::Monotonicity {
                            smaller: small,
                            larger: large,
                            smaller_value: self.value(small),
                            larger_value: self.value(large),
                        });
                    }
                }
            }
        } else {
            for large in 1..=full {
                let mut bits = large;
                while bits != 0 {
                    let bit = bits & bits.wrapping_neg();
                    bits ^= bit;
                    let small = large ^ bit;
                    if small != 0 && self.value(small) > self.value(large) {
                        violations.push(Violation::Monotonicity {
                            smaller: small,
                            larger: large,
                            smaller_value: self.value(small),
                            larger_value: self.value(large),
                        });
                    }
                }
            }
        }
        ValidationReport { violations }
    }

    /// Range `[lo, hi]` the element at `subset` can take, holding all other
    /// elements fixed, while preserving monotonicity. `lo` is the max over
    /// covered subsets (0 for singletons), `hi` the min over covering
    /// supersets.
    pub fn valid_interval(&self, subset: Subset) -> Result<Interval> {
        let full = self.full_set();
        if subset == 0 {
            return Err(MimrfError::contract("valid_interval of the empty set"));
        }
        if subset == full {
            return Err(MimrfError::contract(
                "valid_interval of the full set (pinned at 1)",
            ));
        }
        if subset > full {
            return Err(MimrfError::contract(format!(
                "subset {subset:#b} outside the lattice for {} sources",
                self.num_sources
            )));
        }
        let mut lo = 0.0f64;
        let mut bits = subset;
        while bits != 0 {
            let bit = bits & bits.wrapping_neg();
            bits ^= bit;
            lo = lo.max(self.value(subset ^ bit));
        }
        let mut hi = 1.0f64;
        for k in 0..self.num_sources {
            let bit = 1 << k;
            if subset & bit == 0 {
                hi = hi.min(self.value(subset | bit));
            }
        }
        Ok(Interval { lo, hi })
    }

    /// Generates a random monotone measure, filling lattice levels from the
    /// singletons upward and sampling each element uniformly from its valid
    /// interval given the elements already assigned.
    pub fn random_monotone<R: Rng + ?Sized>(num_sources: usize, rng: &mut R) -> Result<Self> {
        if num_sources == 0 {
            return Err(MimrfError::contract("num_sources must be >= 1"));
        }
        let n = (1usize << num_sources) - 1;
        let mut values = vec![f64::NAN; n];
        values[n - 1] = 1.0;
        let mut measure = FuzzyMeasure {
            num_sources,
            values,
        };
        for mask in mutation_order(num_sources) {
            let Interval { lo, hi } = measure.interval_partial(mask);
            let v = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
            measure.values[(mask - 1) as usize] = v;
        }
        debug_assert!(measure.validate().is_ok());
        Ok(measure)
    }

    // Like valid_interval but tolerates unassigned (NaN) supersets, treating
    // them as bounded above by 1. Used during generation and large-scale
    // mutation sweeps.
    fn interval_partial(&self, subset: Subset) -> Interval {
        let mut lo = 0.0f64;
        let mut bits = subset;
        while bits != 0 {
            let bit = bits & bits.wrapping_neg();
            bits ^= bit;
            let v = self.value(subset ^ bit);
            if v.is_finite() {
                lo = lo.max(v);
            }
        }
        let mut hi = 1.0f64;
        for k in 0..self.num_sources {
            let bit = 1 << k;
            if subset & bit == 0 {
                let v = self.value(subset | bit);
                if v.is_finite() {
                    hi = hi.min(v);
                }
            }
        }
        Interval { lo, hi }
    }

    /// Evolutionary mutation. With probability `lambda` one element is
    /// resampled from a truncated Gaussian centered at its current value
    /// (small-scale); otherwise every non-pinned element is resampled in a
    /// fixed sweep (lattice level ascending, bitmask ascending within a
    /// level), recomputing valid intervals after each assignment
    /// (large-scale).
    pub fn mutate<R: Rng + ?Sized>(&self, lambda: f64, variance: f64, rng: &mut R) -> Self {
        debug_assert!(self.validate().is_ok());
        let mut child = self.clone();
        let order = mutation_order(self.num_sources);
        if order.is_empty() {
            // m = 1: the only element is the pinned full set
            rng.gen::<f64>();
            return child;
        }
        let z: f64 = rng.gen();
        if z < lambda {
            let mask = order[rng.gen_range(0..order.len())];
            let Interval { lo, hi } = child.valid_interval(mask).expect("non-full subset");
            let v = sample_truncated_gaussian(child.value(mask), variance, lo, hi, rng)
                .expect("interval from a valid measure");
            child.values[(mask - 1) as usize] = v;
        } else {
            for mask in order {
                let Interval { lo, hi } = child.valid_interval(mask).expect("non-full subset");
                let v = sample_truncated_gaussian(child.value(mask), variance, lo, hi, rng)
                    .expect("interval from a valid measure");
                child.values[(mask - 1) as usize] = v;
            }
        }
        debug_assert!(child.validate().is_ok());
        child
    }
}

/// Fixed sweep order for generation and large-scale mutation: lattice level
/// ascending, bitmask ascending within a level, full set excluded.
pub fn mutation_order(num_sources: usize) -> Vec<Subset> {
    let full = ((1usize << num_sources) - 1) as Subset;
    let mut order: Vec<Subset> = (1..full).collect();
    order.sort_by_key(|m| (m.count_ones(), *m));
    order
}

/// Draws from `N(mean, variance)` truncated to `[lo, hi]` by inverse-CDF,
/// so runtime stays bounded even when the interval sits far in a tail.
pub fn sample_truncated_gaussian<R: Rng + ?Sized>(
    mean: f64,
    variance: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(MimrfError::contract(format!(
            "variance must be > 0, got {variance}"
        )));
    }
    if lo > hi {
        return Err(MimrfError::contract(format!(
            "truncation bounds out of order: lo={lo} > hi={hi}"
        )));
    }
    if lo == hi {
        return Ok(lo);
    }
    let sd = variance.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    let a = std_normal.cdf((lo - mean) / sd);
    let b = std_normal.cdf((hi - mean) / sd);
    if b - a < 1e-300 {
        // interval so deep in a tail the CDF mass underflows
        return Ok(if mean < lo { lo } else { hi });
    }
    let u: f64 = a + rng.gen::<f64>() * (b - a);
    let v = mean + sd * std_normal.inverse_cdf(u);
    Ok(v.clamp(lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn measure(m: usize, values: &[f64]) -> FuzzyMeasure {
        FuzzyMeasure::new(m, values.to_vec()).unwrap()
    }

    // bypasses constructor validation so validate() itself can be exercised
    fn raw(m: usize, values: &[f64]) -> FuzzyMeasure {
        FuzzyMeasure {
            num_sources: m,
            values: values.to_vec(),
        }
    }

    #[test]
    fn validate_accepts_monotone_measure() {
        let g = raw(2, &[0.3, 0.6, 1.0]);
        assert!(g.validate().is_ok());
        assert!(g.validate_full().is_ok());
    }

    #[test]
    fn validate_enumerates_monotonicity_violations() {
        let g = raw(2, &[0.7, 0.6, 0.5]);
        let report = g.validate();
        let pairs: Vec<(Subset, Subset)> = report
            .violations
            .iter()
            .filter_map(|v| match v {
                Violation::Monotonicity { smaller, larger, .. } => Some((*smaller, *larger)),
                _ => None,
            })
            .collect();
        assert!(pairs.contains(&(0b01, 0b11)));
        assert!(pairs.contains(&(0b10, 0b11)));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NotNormalized { .. })));
    }

    #[test]
    fn validate_flags_out_of_range() {
        let g = raw(2, &[-0.1, 1.2, 1.0]);
        let report = g.validate();
        let out_of_range = report
            .violations
            .iter()
            .filter(|v| matches!(v, Violation::OutOfRange { .. }))
            .count();
        assert_eq!(out_of_range, 2);
    }

    #[test]
    fn valid_interval_matches_hand_computation() {
        // {s1:0.2, s2:0.3, s3:0.1, s12:0.5, s13:0.6, s23:0.4, s123:1.0}
        let g = measure(3, &[0.2, 0.3, 0.5, 0.1, 0.6, 0.4, 1.0]);
        let i12 = g.valid_interval(0b011).unwrap();
        assert_eq!(i12.lo, 0.3);
        assert_eq!(i12.hi, 1.0);
        let i1 = g.valid_interval(0b001).unwrap();
        assert_eq!(i1.lo, 0.0);
        assert_eq!(i1.hi, 0.5);
    }

    #[test]
    fn valid_interval_singleton_under_pinned_full_set() {
        let g = measure(2, &[0.4, 0.4, 1.0]);
        let i = g.valid_interval(0b01).unwrap();
        assert_eq!(i.lo, 0.0);
        assert_eq!(i.hi, 1.0);
    }

    #[test]
    fn valid_interval_rejects_full_and_empty() {
        let g = measure(2, &[0.4, 0.4, 1.0]);
        assert!(g.valid_interval(0b11).is_err());
        assert!(g.valid_interval(0).is_err());
    }

    #[test]
    fn random_monotone_m1_is_pinned() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let g = FuzzyMeasure::random_monotone(1, &mut rng).unwrap();
        assert_eq!(g.values(), &[1.0]);
    }

    #[test]
    fn random_monotone_rejects_zero_sources() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        assert!(FuzzyMeasure::random_monotone(0, &mut rng).is_err());
    }

    #[test]
    fn random_monotone_is_deterministic() {
        let a = FuzzyMeasure::random_monotone(4, &mut ChaCha12Rng::seed_from_u64(99)).unwrap();
        let b = FuzzyMeasure::random_monotone(4, &mut ChaCha12Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_gaussian_symmetric_interval_mean() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let n = 100_000;
        let sum: f64 = (0..n)
            .map(|_| sample_truncated_gaussian(0.5, 0.1, 0.0, 1.0, &mut rng).unwrap())
            .sum();
        assert!((sum / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn truncated_gaussian_degenerate_interval() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        assert_eq!(
            sample_truncated_gaussian(0.9, 0.1, 0.3, 0.3, &mut rng).unwrap(),
            0.3
        );
    }

    #[test]
    fn truncated_gaussian_respects_bounds() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let v = sample_truncated_gaussian(0.9, 0.1, 0.0, 0.2, &mut rng).unwrap();
            assert!((0.0..=0.2).contains(&v), "v={v} escaped [0, 0.2]");
        }
    }

    #[test]
    fn truncated_gaussian_contract_violations() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        assert!(sample_truncated_gaussian(0.5, 0.0, 0.0, 1.0, &mut rng).is_err());
        assert!(sample_truncated_gaussian(0.5, -1.0, 0.0, 1.0, &mut rng).is_err());
        assert!(sample_truncated_gaussian(0.5, 0.1, 0.8, 0.2, &mut rng).is_err());
    }

    #[test]
    fn mutate_small_scale_changes_at_most_one_element() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let g = FuzzyMeasure::random_monotone(3, &mut rng).unwrap();
        let child = g.mutate(1.0, 0.1, &mut rng);
        let changed = g
            .values()
            .iter()
            .zip(child.values())
            .filter(|(a, b)| a != b)
            .count();
        assert!(changed <= 1, "small-scale mutation changed {changed} elements");
        assert!(child.validate().is_ok());
    }

    #[test]
    fn mutate_large_scale_stays_valid() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let g = FuzzyMeasure::random_monotone(4, &mut rng).unwrap();
        let child = g.mutate(0.0, 0.1, &mut rng);
        assert!(child.validate().is_ok());
        assert_eq!(child.value(child.full_set()), 1.0);
    }

    #[test]
    fn mutation_order_is_level_then_bitmask_ascending() {
        assert_eq!(
            mutation_order(3),
            vec![0b001, 0b010, 0b100, 0b011, 0b101, 0b110]
        );
    }

    #[test]
    fn measure_file_round_trip_preserves_values() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let g = FuzzyMeasure::random_monotone(3, &mut rng).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: FuzzyMeasure = serde_json::from_str(&text).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn deserialization_rejects_invalid_measure() {
        let text = r#"{"num_sources":2,"values":[0.7,0.6,0.5]}"#;
        assert!(serde_json::from_str::<FuzzyMeasure>(text).is_err());
    }

    proptest! {
        #[test]
        fn random_monotone_always_valid(seed in 0u64..1000) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let g = FuzzyMeasure::random_monotone(3, &mut rng).unwrap();
            // oracle: exhaustive pairwise subset check over all 7x7 pairs
            prop_assert!(g.validate_full().is_ok());
            prop_assert_eq!(g.value(g.full_set()), 1.0);
        }

        #[test]
        fn chained_mutations_preserve_validity(seed in 0u64..50) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut g = FuzzyMeasure::random_monotone(3, &mut rng).unwrap();
            for _ in 0..200 {
                g = g.mutate(0.8, 0.1, &mut rng);
                prop_assert!(g.validate_full().is_ok());
            }
        }

        #[test]
        fn valid_interval_is_sound(seed in 0u64..200) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let g = FuzzyMeasure::random_monotone(3, &mut rng).unwrap();
            let eps = 1e-9;
            for mask in mutation_order(3) {
                let Interval { lo, hi } = g.valid_interval(mask).unwrap();
                for v in [lo, hi, (lo + hi) / 2.0] {
                    let mut probe = g.clone();
                    probe.values[(mask - 1) as usize] = v;
                    prop_assert!(probe.validate_full().is_ok());
                }
                if lo - eps >= 0.0 && lo > 0.0 {
                    let mut probe = g.clone();
                    probe.values[(mask - 1) as usize] = lo - eps;
                    prop_assert!(!probe.validate_full().is_ok());
                }
                if hi + eps <= 1.0 {
                    let mut probe = g.clone();
                    probe.values[(mask - 1) as usize] = hi + eps;
                    prop_assert!(!probe.validate_full().is_ok());
                }
            }
        }
    }
}
