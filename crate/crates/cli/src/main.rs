//! Command-line pipeline: synthesize a dataset, train a fuzzy measure, fuse
//! test data, and score fused confidences against ground truth.

mod formats;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Deserialize;

use mimrf::ea::{train, EAParams};
use mimrf::fusion_eval::{fuse, rmse, roc_auc, SelectionMode};
use mimrf::mil_data::{
    fill_empty_candidates, load_dataset, load_dataset_lenient, save_dataset, synthesize_dataset,
    Dataset, SynthConfig,
};
use mimrf::model::{load_model, save_model, TrainedModel};

#[derive(Parser)]
#[command(name = "mimrf", version, about = "Multi-resolution multi-source fusion with bag-level labels")]
struct Cli {
    /// Cap the number of worker threads (does not affect results).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a known measure.
    Synth(SynthArgs),
    /// Learn a fuzzy measure from a labeled bag dataset.
    Train(TrainArgs),
    /// Fuse a dataset's instances under a trained model.
    Fuse(FuseArgs),
    /// Score fused confidences against instance-level truth.
    Score(ScoreArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Synthesis configuration document.
    #[arg(long)]
    config: PathBuf,
    /// RNG seed; recorded alongside the outputs for reproducibility.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dataset: PathBuf,
    #[arg(long)]
    out_truth: PathBuf,
    /// Where to write the generating measure; defaults to
    /// `<out-dataset>.measure.json`.
    #[arg(long)]
    out_measure: Option<PathBuf>,
}

/// Optimizer settings from a config file; command-line flags take
/// precedence over these, and these over the built-in defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TrainConfigFile {
    population_size: Option<usize>,
    small_scale_rate: Option<f64>,
    mutation_variance: Option<f64>,
    stop_threshold: Option<f64>,
    max_iterations: Option<usize>,
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    /// Optional config document with optimizer settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Population size P.
    #[arg(long)]
    population: Option<usize>,
    /// Small-scale mutation rate.
    #[arg(long)]
    lambda: Option<f64>,
    /// Mutation variance of the truncated Gaussian.
    #[arg(long)]
    variance: Option<f64>,
    /// Convergence threshold on the best-objective improvement.
    #[arg(long)]
    stop_threshold: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write per-iteration best objective values as delimited text.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Patch empty candidate sets with this constant instead of rejecting
    /// the dataset.
    #[arg(long)]
    fill_empty: Option<f64>,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Candidate aggregation at test time: max, min, or mean.
    #[arg(long, default_value = "max")]
    mode: SelectionMode,
    #[arg(long)]
    out: PathBuf,
    /// Patch empty candidate sets with this constant instead of rejecting
    /// the dataset.
    #[arg(long)]
    fill_empty: Option<f64>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Confidence export produced by `fuse`.
    #[arg(long)]
    confidences: PathBuf,
    /// Truth sidecar mapping instance id to label.
    #[arg(long)]
    truth: PathBuf,
    /// Additionally report the raw ROC area for FPR up to this cutoff.
    #[arg(long)]
    far_cutoff: Option<f64>,
    /// Write ROC points for external plotting.
    #[arg(long)]
    roc_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: configuring {threads} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Fuse(args) => cmd_fuse(args),
        Command::Score(args) => cmd_score(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_with_fill(path: &Path, fill_empty: Option<f64>) -> Result<Dataset> {
    match fill_empty {
        None => Ok(load_dataset(path)?),
        Some(value) => {
            let mut dataset = load_dataset_lenient(path)?;
            let patched = fill_empty_candidates(&mut dataset, value);
            if patched > 0 {
                eprintln!("patched {patched} empty candidate set(s) with constant {value}");
            }
            dataset.validate()?;
            Ok(dataset)
        }
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let config: SynthConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.config.display()))?;
    let mut rng = ChaCha12Rng::seed_from_u64(args.seed);
    let (dataset, truth, measure) = synthesize_dataset(&config, &mut rng)?;

    let tmp = args.out_dataset.with_extension("tmp");
    save_dataset(&dataset, &tmp)?;
    fs::rename(&tmp, &args.out_dataset)
        .with_context(|| format!("renaming into {}", args.out_dataset.display()))?;
    formats::write_truth_file(&args.out_truth, &truth)?;

    let measure_path = args.out_measure.unwrap_or_else(|| {
        let mut p = args.out_dataset.clone();
        p.set_extension("measure.json");
        p
    });
    formats::write_atomic(&measure_path, &serde_json::to_string_pretty(&measure)?)?;

    println!(
        "synthesized {} bags / {} instances (seed {}) -> {}",
        dataset.bags.len(),
        dataset.num_instances(),
        args.seed,
        args.out_dataset.display()
    );
    Ok(())
}

fn resolve_params(args: &TrainArgs) -> Result<EAParams> {
    let file: TrainConfigFile = match &args.config {
        None => TrainConfigFile::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
    };
    let defaults = EAParams::default();
    let params = EAParams {
        population_size: args
            .population
            .or(file.population_size)
            .unwrap_or(defaults.population_size),
        small_scale_rate: args
            .lambda
            .or(file.small_scale_rate)
            .unwrap_or(defaults.small_scale_rate),
        mutation_variance: args
            .variance
            .or(file.mutation_variance)
            .unwrap_or(defaults.mutation_variance),
        stop_threshold: args
            .stop_threshold
            .or(file.stop_threshold)
            .unwrap_or(defaults.stop_threshold),
        max_iterations: args
            .max_iterations
            .or(file.max_iterations)
            .unwrap_or(defaults.max_iterations),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
    };
    params.validate()?;
    Ok(params)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let params = resolve_params(&args)?;
    let dataset = load_with_fill(&args.dataset, args.fill_empty)?;
    let outcome = train(&dataset, &params)?;

    let model = TrainedModel::from_outcome(&outcome, &params);
    save_model(&model, &args.out)?;

    if let Some(trace_path) = &args.trace {
        let mut out = format!("# seed: {}\n", params.seed);
        out.push_str(
            "iteration\tbest_objective\tpopulation_min\tpopulation_mean\tpopulation_max\tpopulation_size\n",
        );
        for s in &outcome.trace.iterations {
            out.push_str(&format!(
                "{}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{}\n",
                s.iteration,
                s.best_objective,
                s.population_min,
                s.population_mean,
                s.population_max,
                s.population_size
            ));
        }
        formats::write_atomic(trace_path, &out)?;
    }

    println!(
        "final J* = {:.6e} after {} iterations{} -> {}",
        model.final_objective,
        model.iterations,
        match model.converged_at {
            Some(t) => format!(" (converged at {t})"),
            None => " (iteration cap reached)".to_string(),
        },
        args.out.display()
    );
    Ok(())
}

fn cmd_fuse(args: FuseArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let dataset = load_with_fill(&args.dataset, args.fill_empty)?;
    if dataset.num_sources != model.measure.num_sources() {
        bail!(
            "dataset has {} sources but the model was trained on {}",
            dataset.num_sources,
            model.measure.num_sources()
        );
    }
    // an already-normalized dataset carries its own (identity-equivalent)
    // scaling; raw datasets go through the model's training scaler
    let instances: Vec<_> = dataset
        .bags
        .iter()
        .flat_map(|b| b.instances.iter().cloned())
        .collect();
    let result = fuse(&model.measure, &model.scaler, &instances, args.mode)?;

    let provenance = vec![
        format!("model: {}", args.model.display()),
        format!("dataset: {}", args.dataset.display()),
        format!("mode: {}", args.mode),
        format!("train_seed: {}", model.params.seed),
    ];
    formats::write_confidence_file(&args.out, &result, &provenance)?;
    println!(
        "fused {} instances (mode {}) -> {}",
        result.entries.len(),
        args.mode,
        args.out.display()
    );
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let rows = formats::read_confidence_file(&args.confidences)?;
    let truth_map = formats::read_truth_file(&args.truth)?;

    let mut confidences = Vec::with_capacity(rows.len());
    let mut truth_values = Vec::with_capacity(rows.len());
    for (id, confidence) in &rows {
        let Some(&t) = truth_map.get(id) else {
            bail!("instance id '{id}' is missing from {}", args.truth.display());
        };
        confidences.push(*confidence);
        truth_values.push(t);
    }
    let binary: Vec<bool> = truth_values.iter().map(|&t| t >= 0.5).collect();

    let report = roc_auc(&confidences, &binary, args.far_cutoff)?;
    let error = rmse(&confidences, &truth_values)?;

    println!("AUC: {:.6}", report.auc);
    if let (Some(cutoff), Some(area)) = (args.far_cutoff, report.auc_far_cutoff) {
        println!("AUC (FPR <= {cutoff}): {area:.6}");
    }
    println!("RMSE: {error:.6}");

    if let Some(roc_path) = &args.roc_out {
        let provenance = vec![
            format!("confidences: {}", args.confidences.display()),
            format!("truth: {}", args.truth.display()),
        ];
        formats::write_roc_file(roc_path, &report.points, &provenance)?;
    }
    Ok(())
}
