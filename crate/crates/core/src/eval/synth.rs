//! Synthetic memorability datasets with known generating parameters.
//!
//! Images get random emotion profiles, novelty and complexity; the mean
//! rating is `1 + 8 * MemScore` under planted thresholds and weights, plus
//! Gaussian noise, clamped to `[1, 9]`. Complexity is drawn independently of
//! everything else, so it carries no signal unless planted with weight.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::cv::{score_images, ImageFeatures, NoveltyChannel, ScoreParams};
use super::{EvalError, RatingsMatrix};
use crate::capture::CaptureWeights;
use crate::rng::stream_rng;
use crate::salience::{Emotion, EmotionThresholds, EmotionVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub seed: u64,
    pub n_images: usize,
    pub weights: CaptureWeights,
    pub params: ScoreParams,
    pub channel: NoveltyChannel,
    /// Standard deviation of the noise on the 1-9 scale.
    pub noise_sd: f64,
    /// Probability that an image shows a dominant emotion.
    pub emotional_fraction: f64,
    /// Upper bound of the uniform novelty draw.
    pub max_novelty: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        let thresholds = EmotionThresholds::new([0.5, 0.45, 0.55, 0.4, 0.5, 0.6, 0.45, 0.5]).expect("valid");
        Self {
            seed: 0,
            n_images: 81,
            weights: CaptureWeights::default(),
            params: ScoreParams { thresholds, novelty_threshold: 0.3 },
            channel: NoveltyChannel::Thresholded,
            noise_sd: 0.5,
            emotional_fraction: 0.6,
            max_novelty: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedDataset {
    pub features: Vec<ImageFeatures>,
    /// Mean rating per image on the 1-9 scale.
    pub ratings: Vec<f64>,
    /// Noise-free `1 + 8 * MemScore`.
    pub clean: Vec<f64>,
}

fn random_emotions<R: Rng>(rng: &mut R, emotional_fraction: f64) -> EmotionVector {
    let mut p = [0.0; 8];
    if rng.random::<f64>() < emotional_fraction {
        let dom = rng.random_range(0..8);
        p[dom] = rng.random_range(0.2..1.0);
        let rest = 1.0 - p[dom];
        let w: Vec<f64> = (0..7).map(|_| rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        let mut k = 0;
        for (i, slot) in p.iter_mut().enumerate() {
            if i != dom {
                *slot = rest * w[k] / total;
                k += 1;
            }
        }
    } else {
        let w: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        for (slot, wi) in p.iter_mut().zip(&w) {
            *slot = wi / total;
        }
        // mostly neutral
        p[Emotion::Neutral.index()] += 1.0;
        for slot in p.iter_mut() {
            *slot /= 2.0;
        }
    }
    EmotionVector::new(p).expect("probabilities in [0, 1]")
}

pub fn planted_dataset(cfg: &PlantedConfig) -> Result<PlantedDataset, EvalError> {
    if cfg.n_images == 0 {
        return Err(EvalError::Config("n_images must be positive".into()));
    }
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| EvalError::Config(format!("noise_sd: {e}")))?;
    let mut rng = stream_rng(cfg.seed, 0x5eed);
    let features: Vec<ImageFeatures> = (0..cfg.n_images)
        .map(|_| ImageFeatures {
            emotions: random_emotions(&mut rng, cfg.emotional_fraction),
            novelty: rng.random_range(0.0..cfg.max_novelty),
            complexity: rng.random::<f64>(),
        })
        .collect();
    let clean: Vec<f64> = score_images(&features, &cfg.params, &cfg.weights, cfg.channel)
        .into_iter()
        .map(|s| 1.0 + 8.0 * s)
        .collect();
    let ratings = clean.iter().map(|c| (c + noise.sample(&mut rng)).clamp(1.0, 9.0)).collect();
    Ok(PlantedDataset { features, ratings, clean })
}

/// Expands per-image mean ratings into a raters x images matrix by adding
/// independent rater noise and rounding to the 1-9 integer scale.
pub fn rater_matrix(means: &[f64], n_raters: usize, rater_sd: f64, seed: u64) -> Result<RatingsMatrix, EvalError> {
    let noise = Normal::new(0.0, rater_sd).map_err(|e| EvalError::Config(format!("rater_sd: {e}")))?;
    let mut rng = stream_rng(seed, 0xa7e5);
    let values = (0..n_raters)
        .map(|_| means.iter().map(|m| (m + noise.sample(&mut rng)).round().clamp(1.0, 9.0)).collect())
        .collect();
    RatingsMatrix::new(
        (0..means.len()).map(|i| format!("img{i:03}")).collect(),
        (0..n_raters).map(|r| format!("rater{r:02}")).collect(),
        values,
    )
}
