//! Scene novelty against a user's stored scenes, plus the repeated burn-in
//! protocol used when scoring an unordered image collection.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_rng;
use crate::vector::{cosine_distance, Embedding, VectorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoveltyError {
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("invalid novelty configuration: {0}")]
    Config(String),
}

/// Novelty of a scene. An empty history has no defined minimum distance;
/// the first scene of a user is a reference and is always kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Novelty {
    FirstScene,
    Distance(f64),
}

impl Novelty {
    pub fn distance(self) -> Option<f64> {
        match self {
            Novelty::FirstScene => None,
            Novelty::Distance(d) => Some(d),
        }
    }
}

/// Novelty threshold in cosine-distance units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NoveltyConfig {
    threshold: f64,
}

impl NoveltyConfig {
    pub fn new(threshold: f64) -> Result<Self, NoveltyError> {
        if !(0.0..=2.0).contains(&threshold) {
            return Err(NoveltyError::Config(format!(
                "novelty threshold must lie in [0, 2], got {threshold}"
            )));
        }
        Ok(Self { threshold })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl Default for NoveltyConfig {
    fn default() -> Self {
        Self { threshold: 0.3 }
    }
}

impl TryFrom<f64> for NoveltyConfig {
    type Error = NoveltyError;
    fn try_from(t: f64) -> Result<Self, Self::Error> {
        Self::new(t)
    }
}

impl From<NoveltyConfig> for f64 {
    fn from(c: NoveltyConfig) -> Self {
        c.threshold
    }
}

/// Minimum cosine distance from `current` to every element of `history`.
pub fn novelty_score<'a, I>(current: &Embedding, history: I) -> Result<Novelty, NoveltyError>
where
    I: IntoIterator<Item = &'a Embedding>,
{
    let mut best: Option<f64> = None;
    for h in history {
        let d = cosine_distance(current, h)?;
        best = Some(best.map_or(d, |b: f64| b.min(d)));
    }
    Ok(best.map_or(Novelty::FirstScene, Novelty::Distance))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BurninConfig {
    pub burn_in_k: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BurninConfig {
    fn default() -> Self {
        Self {
            burn_in_k: 5,
            repeats: 1000,
            seed: 0,
        }
    }
}

impl BurninConfig {
    fn validate(&self, n_images: usize) -> Result<(), NoveltyError> {
        if self.burn_in_k == 0 {
            return Err(NoveltyError::Config("burn_in_k must be positive".into()));
        }
        if self.repeats == 0 {
            return Err(NoveltyError::Config("repeats must be at least 1".into()));
        }
        if self.burn_in_k >= n_images {
            return Err(NoveltyError::Config(format!(
                "need more than {} images for burn-in, got {n_images}",
                self.burn_in_k
            )));
        }
        Ok(())
    }
}

/// Repeated burn-in novelty.
///
/// Each repeat shuffles the images with its own PRNG stream (`seed`, stream =
/// repeat index). The first `burn_in_k` images of the order are not scored but
/// still serve as history. Every later image is scored by its minimum cosine
/// distance to all images preceding it in that order. The result holds, per
/// input index, the mean over the repeats that scored it (`None` if none did).
///
/// Output is identical for a given seed regardless of thread count.
pub fn burnin_novelty(
    embeddings: &[Embedding],
    cfg: &BurninConfig,
) -> Result<Vec<Option<f64>>, NoveltyError> {
    let n = embeddings.len();
    cfg.validate(n)?;
    let dist = distance_matrix(embeddings)?;

    let runs: Vec<Vec<(usize, f64)>> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut stream_rng(cfg.seed, r as u64));
            let mut scored = Vec::with_capacity(n - cfg.burn_in_k);
            for pos in cfg.burn_in_k..n {
                let i = order[pos];
                let m = order[..pos]
                    .iter()
                    .map(|&j| dist[i * n + j])
                    .fold(f64::INFINITY, f64::min);
                scored.push((i, m));
            }
            scored
        })
        .collect();

    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for run in &runs {
        for &(i, d) in run {
            sums[i] += d;
            counts[i] += 1;
        }
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .map(|(s, c)| (c > 0).then(|| s / c as f64))
        .collect())
}

fn distance_matrix(embeddings: &[Embedding]) -> Result<Vec<f64>, NoveltyError> {
    let n = embeddings.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cosine_distance(&embeddings[i], &embeddings[j])?;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    Ok(dist)
}
