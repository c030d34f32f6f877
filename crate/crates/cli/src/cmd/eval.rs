use std::path::PathBuf;

use clap::{Args, Subcommand};
use selmem_core::eval::io::{align_features, read_features, read_ratings};
use selmem_core::eval::report::{correlation_table, recall_table, CorrelationRow};
use selmem_core::eval::stats::HumanConsistency;
use selmem_core::eval::{
    alpha_sweep, baseline_interval, baseline_random, default_alphas, evaluate_fixed_scores, human_consistency,
    nested_cv_memorability, planted_dataset, BenchmarkInstance, CvSummary, ImageFeatures, Normalization,
    PlantedConfig, WeightResult,
};
use serde::Serialize;

use super::{write_file, write_json};
use crate::config::CliConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Subcommand)]
pub enum EvalCmd {
    /// Nested cross-validation of the memorability score against ratings
    Memorability(MemorabilityArgs),
    /// Recall@K sweep of image/caption fusion on the synthetic benchmark
    Retrieval(RetrievalArgs),
}

#[derive(Debug, Args)]
pub struct MemorabilityArgs {
    /// Ratings CSV (image_id, then one column per rater)
    #[arg(long, required_unless_present = "planted", requires = "features")]
    pub ratings: Option<PathBuf>,
    /// Features CSV (image_id, eight emotions, novelty, complexity)
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Generate ratings from planted parameters instead of reading files
    #[arg(long, conflicts_with_all = ["ratings", "features"])]
    pub planted: bool,
    /// Image count for --planted
    #[arg(long, default_value_t = 81)]
    pub images: usize,
    /// Rating noise for --planted, on the 1-9 scale
    #[arg(long = "noise-sd", default_value_t = 0.5)]
    pub noise_sd: f64,
    /// Directory for memorability.txt and memorability.json
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RetrievalArgs {
    /// Gallery size (one query per item)
    #[arg(long = "gallery-size")]
    pub gallery_size: Option<usize>,
    /// Min-max instead of z-score normalization
    #[arg(long)]
    pub minmax: bool,
    /// Directory for retrieval.txt and retrieval.json
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Baselines {
    random: CvSummary,
    interval_5: CvSummary,
    interval_10: CvSummary,
}

#[derive(Debug, Serialize)]
struct MemorabilityReport {
    source: String,
    images: usize,
    human: Option<HumanConsistency>,
    baselines: Baselines,
    models: Vec<WeightResult>,
}

pub fn run(cfg: &CliConfig, cmd: &EvalCmd) -> Result<()> {
    match cmd {
        EvalCmd::Memorability(a) => memorability(cfg, a),
        EvalCmd::Retrieval(a) => retrieval(cfg, a),
    }
}

struct Inputs {
    source: String,
    features: Vec<ImageFeatures>,
    ratings: Vec<f64>,
    human: Option<HumanConsistency>,
}

fn inputs(cfg: &CliConfig, a: &MemorabilityArgs) -> Result<Inputs> {
    if a.planted {
        let data = planted_dataset(&PlantedConfig {
            seed: cfg.seed,
            n_images: a.images,
            noise_sd: a.noise_sd,
            ..PlantedConfig::default()
        })?;
        return Ok(Inputs {
            source: format!("planted (seed {}, {} images)", cfg.seed, a.images),
            features: data.features,
            ratings: data.ratings,
            human: None,
        });
    }
    let (ratings_path, features_path) = match (&a.ratings, &a.features) {
        (Some(r), Some(f)) => (r, f),
        _ => return Err(CliError::Input("--ratings and --features are both required".into())),
    };
    let matrix = read_ratings(ratings_path)?;
    let features = align_features(matrix.image_ids(), read_features(features_path)?)?;
    let human = (matrix.rater_count() >= 2).then(|| human_consistency(&matrix)).transpose()?;
    Ok(Inputs { source: ratings_path.display().to_string(), features, ratings: matrix.mean_ratings(), human })
}

fn memorability(cfg: &CliConfig, a: &MemorabilityArgs) -> Result<()> {
    let Inputs { source, features, ratings, human } = inputs(cfg, a)?;
    let cv = &cfg.cv;
    let n = ratings.len();
    let random = evaluate_fixed_scores(&ratings, cv, |r| baseline_random(n, cv.seed.wrapping_add(1000 + r as u64)))?;
    let every = |k| -> Result<CvSummary> {
        let scores = baseline_interval(n, k)?;
        Ok(evaluate_fixed_scores(&ratings, cv, |_| scores.clone())?)
    };
    let baselines = Baselines { random, interval_5: every(5)?, interval_10: every(10)? };
    let models = nested_cv_memorability(&features, &ratings, cv)?;

    let mut rows = Vec::new();
    if let Some(h) = &human {
        rows.push(CorrelationRow { category: "Human", approach: "Consistency".into(), mean_rho: h.mean_rho, std_rho: None, fisher_p: None });
    }
    rows.push(CorrelationRow::from_summary("Baseline", "Random", &baselines.random));
    rows.push(CorrelationRow::from_summary("Baseline", "Interval (n=5)", &baselines.interval_5));
    rows.push(CorrelationRow::from_summary("Baseline", "Interval (n=10)", &baselines.interval_10));
    rows.extend(models.iter().map(|m| CorrelationRow::from_weights("Model", m)));
    let table = format!(
        "{source}: {n} images, {} x {}-fold nested CV\n{}",
        cv.repeats,
        cv.outer_folds,
        correlation_table(&rows)
    );
    print!("{table}");
    if let Some(dir) = &a.out {
        write_file(dir, "memorability.txt", &table)?;
        write_json(dir, "memorability.json", &MemorabilityReport { source, images: n, human, baselines, models })?;
    }
    Ok(())
}

fn retrieval(cfg: &CliConfig, a: &RetrievalArgs) -> Result<()> {
    let mut bench = cfg.benchmark;
    if let Some(g) = a.gallery_size {
        bench.gallery_size = g;
    }
    if bench.gallery_size < 10 {
        return Err(CliError::Config(format!("gallery size must be at least 10, got {}", bench.gallery_size)));
    }
    let norm = if a.minmax { Normalization::MinMax } else { Normalization::ZScore };
    let instance = BenchmarkInstance::synthetic(&bench)?;
    let sweep = alpha_sweep(&instance, &default_alphas(), norm)?;
    let mut table = format!(
        "synthetic benchmark (seed {}, dim {}, {} queries)\n{}",
        bench.seed,
        bench.dim,
        instance.len(),
        recall_table(&sweep)
    );
    if let Some((alpha, r1)) = sweep.best_interior_r1() {
        table.push_str(&format!("best interior alpha {alpha:.1}: R@1 {r1:.1}\n"));
    }
    print!("{table}");
    if let Some(dir) = &a.out {
        write_file(dir, "retrieval.txt", &table)?;
        write_json(dir, "retrieval.json", &sweep)?;
    }
    Ok(())
}
