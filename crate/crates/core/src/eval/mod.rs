//! Offline evaluation harness.
//!
//! - [`stats`]: Spearman, Fisher combination, per-fold p-values, rater consistency
//! - [`cv`]: repeated stratified nested cross-validation of the memorability score
//! - [`recall`]: Recall@K and the image/text fusion sweep
//! - [`synth`]: planted-parameter rating generators
//! - [`io`], [`report`]: CSV inputs and plain-text tables

pub mod cv;
pub mod io;
pub mod recall;
pub mod report;
pub mod stats;
pub mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cv::{
    baseline_interval, baseline_random, evaluate_fixed_scores, nested_cv_memorability, score_images, stratified_folds,
    CvConfig, CvSummary, FoldOutcome, ImageFeatures, NoveltyChannel, ScoreParams, WeightResult,
};
pub use recall::{alpha_sweep, default_alphas, recall_at_k, BenchmarkConfig, BenchmarkInstance, Normalization, RecallRow, SweepTable};
pub use synth::{planted_dataset, rater_matrix, PlantedConfig, PlantedDataset};
pub use stats::{average_ranks, chi_square_sf, fisher_combined, gamma_q, human_consistency, spearman, spearman_pvalue};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid evaluation config: {0}")]
    Config(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Encoder(#[from] crate::encoders::EncoderError),
}

/// Raters x images grid of 1-9 ratings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsMatrix {
    image_ids: Vec<String>,
    rater_ids: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl RatingsMatrix {
    /// `values[r][i]` is rater `r`'s rating of image `i`.
    pub fn new(image_ids: Vec<String>, rater_ids: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self, EvalError> {
        if values.len() != rater_ids.len() {
            return Err(EvalError::Schema(format!("{} rater ids for {} rows", rater_ids.len(), values.len())));
        }
        for (r, row) in values.iter().enumerate() {
            if row.len() != image_ids.len() {
                return Err(EvalError::Schema(format!(
                    "rater {} has {} ratings for {} images",
                    rater_ids[r],
                    row.len(),
                    image_ids.len()
                )));
            }
            if let Some((i, v)) = row.iter().enumerate().find(|(_, v)| !(1.0..=9.0).contains(*v)) {
                return Err(EvalError::Schema(format!(
                    "rating {v} by {} for {} outside [1, 9]",
                    rater_ids[r], image_ids[i]
                )));
            }
        }
        Ok(Self { image_ids, rater_ids, values })
    }

    pub fn image_ids(&self) -> &[String] {
        &self.image_ids
    }

    pub fn rater_ids(&self) -> &[String] {
        &self.rater_ids
    }

    pub fn image_count(&self) -> usize {
        self.image_ids.len()
    }

    pub fn rater_count(&self) -> usize {
        self.rater_ids.len()
    }

    pub fn rater(&self, r: usize) -> &[f64] {
        &self.values[r]
    }

    pub fn value(&self, rater: usize, image: usize) -> f64 {
        self.values[rater][image]
    }

    /// Per-image mean over raters.
    pub fn mean_ratings(&self) -> Vec<f64> {
        let k = self.rater_count() as f64;
        (0..self.image_count())
            .map(|i| self.values.iter().map(|row| row[i]).sum::<f64>() / k)
            .collect()
    }
}
