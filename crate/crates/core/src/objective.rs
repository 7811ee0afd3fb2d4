//! Two-level min/max training objective: per-instance selection over
//! candidate correspondences, per-bag selection over instances, summed over
//! bags. Minimizing it drives the fused value of every negative bag toward 0
//! and at least one instance of every positive bag toward 1.

use serde::Serialize;

use crate::choquet::choquet_integral;
use crate::error::{MimrfError, Result};
use crate::fuzzy_measure::FuzzyMeasure;
use crate::mil_data::{Bag, CandidateSet, Dataset};

/// One bag's share of the objective.
#[derive(Debug, Clone, Serialize)]
pub struct BagContribution {
    pub bag_id: String,
    pub label: f64,
    pub contribution: f64,
    /// Index of the instance whose value the outer extremum selected.
    pub selected_instance: usize,
    /// For every instance, the candidate index the inner extremum selected.
    pub candidate_selections: Vec<usize>,
}

/// Full evaluation of the objective with its selection structure.
#[derive(Debug, Clone, Serialize)]
pub struct ObjectiveBreakdown {
    pub total: f64,
    pub negative_term: f64,
    pub positive_term: f64,
    pub bags: Vec<BagContribution>,
}

/// Minimum fused value over an instance's candidates (ties to the lowest
/// index), with the argmin.
pub fn instance_ci_negative(
    measure: &FuzzyMeasure,
    set: &CandidateSet,
) -> Result<(f64, usize)> {
    extremal_candidate(measure, set, false)
}

/// Maximum fused value over an instance's candidates (ties to the lowest
/// index), with the argmax.
pub fn instance_ci_positive(
    measure: &FuzzyMeasure,
    set: &CandidateSet,
) -> Result<(f64, usize)> {
    extremal_candidate(measure, set, true)
}

fn extremal_candidate(
    measure: &FuzzyMeasure,
    set: &CandidateSet,
    take_max: bool,
) -> Result<(f64, usize)> {
    if set.candidates.is_empty() {
        return Err(MimrfError::contract(format!(
            "instance {} has no candidates",
            set.instance_id
        )));
    }
    let mut best = f64::NAN;
    let mut best_idx = 0;
    for (c, cand) in set.candidates.iter().enumerate() {
        let ci = choquet_integral(measure, cand)?;
        if c == 0 || (take_max && ci > best) || (!take_max && ci < best) {
            best = ci;
            best_idx = c;
        }
    }
    Ok((best, best_idx))
}

/// Negative-bag objective: max over instances of the squared min-candidate
/// fused value, with the selecting instance index.
pub fn bag_objective_negative(measure: &FuzzyMeasure, bag: &Bag) -> Result<(f64, usize)> {
    if bag.label != 0.0 {
        return Err(MimrfError::contract(format!(
            "bag {} has label {}, expected 0",
            bag.bag_id, bag.label
        )));
    }
    Ok(split_contribution(&bag_contribution(measure, bag, 0.0)?))
}

/// Positive-bag objective: min over instances of the squared distance of the
/// max-candidate fused value from 1, with the selecting instance index.
pub fn bag_objective_positive(measure: &FuzzyMeasure, bag: &Bag) -> Result<(f64, usize)> {
    if bag.label != 1.0 {
        return Err(MimrfError::contract(format!(
            "bag {} has label {}, expected 1",
            bag.bag_id, bag.label
        )));
    }
    Ok(split_contribution(&bag_contribution(measure, bag, 1.0)?))
}

fn split_contribution(c: &BagContribution) -> (f64, usize) {
    (c.contribution, c.selected_instance)
}

// Shared two-level evaluation against a target label d. Bags with d < 0.5
// use the negative-style aggregation (min over candidates, max over
// instances); d >= 0.5 uses the positive-style mirror. At d = 0 and d = 1
// this is exactly the binary objective.
fn bag_contribution(measure: &FuzzyMeasure, bag: &Bag, d: f64) -> Result<BagContribution> {
    if bag.instances.is_empty() {
        return Err(MimrfError::contract(format!(
            "bag {} has no instances",
            bag.bag_id
        )));
    }
    let positive_style = d >= 0.5;
    let mut candidate_selections = Vec::with_capacity(bag.instances.len());
    let mut best = f64::NAN;
    let mut selected_instance = 0;
    for (i, inst) in bag.instances.iter().enumerate() {
        let (ci, cand_idx) = extremal_candidate(measure, inst, positive_style)?;
        candidate_selections.push(cand_idx);
        let sq = (ci - d) * (ci - d);
        // positive-style keeps the smallest error, negative-style the largest
        let better = if positive_style { sq < best } else { sq > best };
        if i == 0 || better {
            best = sq;
            selected_instance = i;
        }
    }
    Ok(BagContribution {
        bag_id: bag.bag_id.clone(),
        label: bag.label,
        contribution: best,
        selected_instance,
        candidate_selections,
    })
}

/// Evaluates the binary objective `J = J⁻ + J⁺` over a dataset whose bag
/// labels are exactly 0 or 1.
pub fn total_objective(measure: &FuzzyMeasure, dataset: &Dataset) -> Result<ObjectiveBreakdown> {
    for bag in &dataset.bags {
        if bag.label != 0.0 && bag.label != 1.0 {
            return Err(MimrfError::contract(format!(
                "bag {} has non-binary label {}; use total_objective_general",
                bag.bag_id, bag.label
            )));
        }
    }
    if !dataset.has_both_binary_classes() {
        return Err(MimrfError::contract(
            "training requires at least one positive and one negative bag",
        ));
    }
    evaluate(measure, dataset)
}

/// Real-label generalization: each bag is fit toward its own label
/// `d ∈ [0, 1]`, with the aggregation style chosen by thresholding `d` at
/// 0.5. Reduces exactly to [`total_objective`] at `d ∈ {0, 1}`.
pub fn total_objective_general(
    measure: &FuzzyMeasure,
    dataset: &Dataset,
) -> Result<ObjectiveBreakdown> {
    for bag in &dataset.bags {
        if !(0.0..=1.0).contains(&bag.label) {
            return Err(MimrfError::contract(format!(
                "bag {} has label {} outside [0, 1]",
                bag.bag_id, bag.label
            )));
        }
    }
    evaluate(measure, dataset)
}

fn evaluate(measure: &FuzzyMeasure, dataset: &Dataset) -> Result<ObjectiveBreakdown> {
    let mut bags = Vec::with_capacity(dataset.bags.len());
    let mut negative_term = 0.0;
    let mut positive_term = 0.0;
    for bag in &dataset.bags {
        let contribution = bag_contribution(measure, bag, bag.label)?;
        if bag.label < 0.5 {
            negative_term += contribution.contribution;
        } else {
            positive_term += contribution.contribution;
        }
        bags.push(contribution);
    }
    Ok(ObjectiveBreakdown {
        total: negative_term + positive_term,
        negative_term,
        positive_term,
        bags,
    })
}
