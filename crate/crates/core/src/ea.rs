//! Evolutionary search over monotone fuzzy measures.
//!
//! Each iteration mutates every member of the population, pools parents and
//! children, keeps the best quarter of the pool (elitism), and fills the
//! rest by multinomial sampling without replacement weighted by fitness. The
//! incumbent best measure always survives, so the best objective trace is
//! non-increasing.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choquet::SourceScaler;
use crate::error::{MimrfError, Result};
use crate::fuzzy_measure::FuzzyMeasure;
use crate::mil_data::Dataset;
use crate::objective::total_objective_general;

const FITNESS_EPSILON: f64 = 1e-6;

/// Evolutionary-optimizer hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EAParams {
    /// Population size P.
    pub population_size: usize,
    /// Rate of small-scale (single-element) mutation; the rest of the time
    /// the whole measure is resampled.
    pub small_scale_rate: f64,
    /// Variance of the truncated Gaussian used for resampling.
    pub mutation_variance: f64,
    /// Stop once the best objective improves by no more than this between
    /// consecutive iterations.
    pub stop_threshold: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for EAParams {
    fn default() -> Self {
        EAParams {
            population_size: 30,
            small_scale_rate: 0.8,
            mutation_variance: 0.1,
            stop_threshold: 1e-4,
            max_iterations: 5000,
            seed: 0,
        }
    }
}

impl EAParams {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(MimrfError::contract("population_size must be >= 2"));
        }
        if !(0.0..=1.0).contains(&self.small_scale_rate) {
            return Err(MimrfError::contract("small_scale_rate must be in [0, 1]"));
        }
        if !(self.mutation_variance > 0.0) {
            return Err(MimrfError::contract("mutation_variance must be > 0"));
        }
        if !(self.stop_threshold > 0.0) {
            return Err(MimrfError::contract("stop_threshold must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(MimrfError::contract("max_iterations must be >= 1"));
        }
        Ok(())
    }
}

/// Per-iteration population statistics.
#[derive(Debug, Clone, Serialize)]
pub struct IterationStats {
    pub iteration: usize,
    /// Best objective seen so far (non-increasing).
    pub best_objective: f64,
    pub population_min: f64,
    pub population_mean: f64,
    pub population_max: f64,
    pub population_size: usize,
}

/// Record of one training run.
#[derive(Debug, Clone, Serialize)]
pub struct TrainingTrace {
    pub iterations: Vec<IterationStats>,
    /// Iteration at which the stop threshold fired, if before the cap.
    pub converged_at: Option<usize>,
    pub wall_time_secs: f64,
}

impl TrainingTrace {
    pub fn final_objective(&self) -> f64 {
        self.iterations
            .last()
            .map(|s| s.best_objective)
            .unwrap_or(f64::NAN)
    }

    pub fn num_iterations(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }
}

/// Result of [`train`]: the best measure found, the scaler the training data
/// was normalized with, and the per-iteration trace.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub measure: FuzzyMeasure,
    pub scaler: SourceScaler,
    pub trace: TrainingTrace,
}

/// Maps objective values to selection probabilities:
/// `p_i ∝ (max(J) - J_i + ε)` with `ε = 1e-6`, which is strictly decreasing
/// in the objective and degrades to uniform when all objectives are equal.
pub fn fitness_from_objective(objectives: &[f64]) -> Result<Vec<f64>> {
    if objectives.is_empty() {
        return Err(MimrfError::contract("no objectives to rank"));
    }
    if objectives.iter().any(|j| !j.is_finite()) {
        return Err(MimrfError::contract("non-finite objective value"));
    }
    let max = objectives.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = objectives.iter().map(|j| max - j + FITNESS_EPSILON).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

// Draws `count` distinct indices, each round proportional to the remaining
// weights.
fn multinomial_without_replacement<R: Rng + ?Sized>(
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut remaining = weights.to_vec();
    let mut picked = Vec::with_capacity(count);
    for _ in 0..count {
        let total: f64 = remaining.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        let mut choice = remaining.len() - 1;
        for (i, &w) in remaining.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            if u < w {
                choice = i;
                break;
            }
            u -= w;
        }
        picked.push(choice);
        remaining[choice] = 0.0;
    }
    picked
}

/// Learns the fuzzy measure minimizing the bag-level objective.
///
/// The dataset is normalized first (fitting a scaler if it does not carry
/// one). Selection keeps the lowest-objective quarter of the pooled 2P
/// parents and children, then fills the population back to P by multinomial
/// sampling from the rest. The run stops when the best objective improves by
/// at most `stop_threshold` across an iteration, or at the iteration cap.
pub fn train(dataset: &Dataset, params: &EAParams) -> Result<TrainOutcome> {
    params.validate()?;
    dataset.validate().map_err(|e| MimrfError::contract(e.to_string()))?;
    let has_positive = dataset.bags.iter().any(|b| b.label >= 0.5);
    let has_negative = dataset.bags.iter().any(|b| b.label < 0.5);
    if !has_positive || !has_negative {
        let missing = if has_positive {
            "negative (label < 0.5)"
        } else {
            "positive (label >= 0.5)"
        };
        return Err(MimrfError::contract(format!(
            "training requires both bag classes; no {missing} bags found"
        )));
    }
    let started = Instant::now();
    let data = dataset.normalize()?;
    let scaler = data.scaler.clone().expect("normalize sets the scaler");
    let m = data.num_sources;
    let p = params.population_size;
    let elite_count = p / 2;

    let mut rng = ChaCha12Rng::seed_from_u64(params.seed);

    let evaluate = |pop: &[FuzzyMeasure], iteration: usize| -> Result<Vec<f64>> {
        let js: Vec<f64> = pop
            .par_iter()
            .map(|g| total_objective_general(g, &data).map(|b| b.total))
            .collect::<Result<Vec<f64>>>()?;
        if js.iter().any(|j| !j.is_finite()) {
            return Err(MimrfError::NonFiniteObjective { iteration });
        }
        Ok(js)
    };

    let mut population: Vec<FuzzyMeasure> = (0..p)
        .map(|_| FuzzyMeasure::random_monotone(m, &mut rng))
        .collect::<Result<_>>()?;
    let mut objectives = evaluate(&population, 0)?;

    let mut best_objective = f64::INFINITY;
    let mut best_measure = population[0].clone();
    for (g, &j) in population.iter().zip(&objectives) {
        if j < best_objective {
            best_objective = j;
            best_measure = g.clone();
        }
    }

    let stats = |iteration: usize, best: f64, js: &[f64]| IterationStats {
        iteration,
        best_objective: best,
        population_min: js.iter().cloned().fold(f64::INFINITY, f64::min),
        population_mean: js.iter().sum::<f64>() / js.len() as f64,
        population_max: js.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        population_size: js.len(),
    };

    let mut trace = TrainingTrace {
        iterations: vec![stats(0, best_objective, &objectives)],
        converged_at: None,
        wall_time_secs: 0.0,
    };

    for t in 1..=params.max_iterations {
        let children: Vec<FuzzyMeasure> = population
            .iter()
            .map(|g| g.mutate(params.small_scale_rate, params.mutation_variance, &mut rng))
            .collect();
        let child_objectives = evaluate(&children, t)?;

        let mut pool: Vec<FuzzyMeasure> = population;
        pool.extend(children);
        let mut pool_j = objectives;
        pool_j.extend(child_objectives);

        // elitism: the P/2 lowest objectives of the 2P pool, ties by index
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&a, &b| pool_j[a].partial_cmp(&pool_j[b]).expect("finite").then(a.cmp(&b)));
        let elites = &order[..elite_count];
        let rest = &order[elite_count..];

        let rest_j: Vec<f64> = rest.iter().map(|&i| pool_j[i]).collect();
        let probabilities = fitness_from_objective(&rest_j)?;
        let sampled = multinomial_without_replacement(&probabilities, p - elite_count, &mut rng);

        let mut next_pop = Vec::with_capacity(p);
        let mut next_j = Vec::with_capacity(p);
        for &i in elites {
            next_pop.push(pool[i].clone());
            next_j.push(pool_j[i]);
        }
        for s in sampled {
            let i = rest[s];
            next_pop.push(pool[i].clone());
            next_j.push(pool_j[i]);
        }
        population = next_pop;
        objectives = next_j;

        let previous_best = best_objective;
        let iteration_best_idx = order[0];
        if pool_j[iteration_best_idx] < best_objective {
            best_objective = pool_j[iteration_best_idx];
            best_measure = pool[iteration_best_idx].clone();
        }

        trace.iterations.push(stats(t, best_objective, &objectives));

        if (previous_best - best_objective).abs() <= params.stop_threshold {
            trace.converged_at = Some(t);
            break;
        }
    }

    trace.wall_time_secs = started.elapsed().as_secs_f64();
    debug_assert!(best_measure.validate().is_ok());
    Ok(TrainOutcome {
        measure: best_measure,
        scaler,
        trace,
    })
}
