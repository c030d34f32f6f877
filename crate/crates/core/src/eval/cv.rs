//! Repeated stratified nested cross-validation of the memorability score.
//!
//! Each repeat draws its own stratified outer split from a dedicated PRNG
//! stream. Inside every outer training portion, a coordinate-ascent search
//! picks the emotion thresholds and novelty threshold that maximize the mean
//! inner-fold Spearman correlation; the chosen parameters are then scored on
//! the held-out outer fold. Repeats run in parallel and are reduced in
//! repeat order, so results do not depend on the worker count.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{fisher_combined, spearman, spearman_pvalue};
use super::EvalError;
use crate::capture::{mem_score, novelty_channel, CaptureWeights};
use crate::novelty::Novelty;
use crate::rng::stream_rng;
use crate::salience::{frame_salience, Emotion, EmotionThresholds, EmotionVector};

/// Per-image inputs of the memorability score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageFeatures {
    pub emotions: EmotionVector,
    /// Burn-in novelty (mean minimum cosine distance).
    pub novelty: f64,
    pub complexity: f64,
}

/// How burn-in novelty enters the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoveltyChannel {
    /// The distance itself; the novelty threshold is not searched.
    Raw,
    /// `max(0, (n - T_n) / (2 - T_n))`, as in the capture gate.
    #[default]
    Thresholded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    pub thresholds: EmotionThresholds,
    pub novelty_threshold: f64,
}

impl Default for ScoreParams {
    fn default() -> Self {
        Self { thresholds: EmotionThresholds::default(), novelty_threshold: 0.3 }
    }
}

/// Memorability score of every image under fixed parameters.
pub fn score_images(
    features: &[ImageFeatures],
    params: &ScoreParams,
    weights: &CaptureWeights,
    channel: NoveltyChannel,
) -> Vec<f64> {
    features.iter().map(|f| score_one(f, params, weights, channel)).collect()
}

fn score_one(f: &ImageFeatures, params: &ScoreParams, weights: &CaptureWeights, channel: NoveltyChannel) -> f64 {
    let s_e = frame_salience(&f.emotions, &params.thresholds);
    let s_n = match channel {
        NoveltyChannel::Raw => f.novelty,
        NoveltyChannel::Thresholded => novelty_channel(Novelty::Distance(f.novelty), params.novelty_threshold),
    };
    mem_score(s_e, s_n, f.complexity, weights)
}

/// Default weight rows: (emotion, novelty, complexity).
pub fn default_weight_grid() -> Vec<CaptureWeights> {
    [
        (0.5, 0.5, 0.0),
        (1.0, 0.0, 0.0),
        (0.5, 0.3, 0.2),
        (0.5, 0.0, 0.5),
        (0.0, 1.0, 0.0),
        (0.0, 0.0, 1.0),
    ]
    .into_iter()
    .map(|(e, n, c)| CaptureWeights::new(e, n, c).expect("table weights sum to one"))
    .collect()
}

/// `{0.00, 0.05, ..., 0.95}`.
pub fn default_threshold_grid() -> Vec<f64> {
    (0..20).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub strat_bins: usize,
    pub weight_grid: Vec<CaptureWeights>,
    /// Candidate per-emotion thresholds.
    pub threshold_grid: Vec<f64>,
    /// Candidate novelty thresholds.
    pub novelty_grid: Vec<f64>,
    /// Coordinate-ascent sweeps over all coordinates.
    pub passes: usize,
    pub novelty_channel: NoveltyChannel,
    /// Starting point of the search.
    pub initial: ScoreParams,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            outer_folds: 5,
            inner_folds: 3,
            repeats: 20,
            seed: 0,
            strat_bins: 5,
            weight_grid: default_weight_grid(),
            threshold_grid: default_threshold_grid(),
            novelty_grid: default_threshold_grid(),
            passes: 2,
            novelty_channel: NoveltyChannel::Thresholded,
            initial: ScoreParams::default(),
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::Config(m));
        if self.outer_folds < 2 || self.inner_folds < 2 {
            return bad(format!("need at least 2 outer and inner folds, got {}/{}", self.outer_folds, self.inner_folds));
        }
        if self.repeats == 0 || self.strat_bins == 0 || self.passes == 0 {
            return bad("repeats, strat_bins and passes must be positive".into());
        }
        if self.weight_grid.is_empty() || self.threshold_grid.is_empty() || self.novelty_grid.is_empty() {
            return bad("search grids must be non-empty".into());
        }
        if let Some(t) = self.threshold_grid.iter().find(|t| !(0.0..1.0).contains(*t)) {
            return bad(format!("emotion threshold candidate {t} outside [0, 1)"));
        }
        if let Some(t) = self.novelty_grid.iter().find(|t| !(0.0..=2.0).contains(*t)) {
            return bad(format!("novelty threshold candidate {t} outside [0, 2]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub repeat: usize,
    pub fold: usize,
    pub size: usize,
    pub rho: f64,
    pub p: f64,
    /// Parameters chosen by the inner search (absent for fixed scores).
    pub params: Option<ScoreParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub mean_rho: f64,
    pub std_rho: f64,
    pub fisher_p: f64,
    pub folds: Vec<FoldOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightResult {
    pub weights: CaptureWeights,
    #[serde(flatten)]
    pub summary: CvSummary,
}

/// Assigns each item to one of `k` folds so that every quantile bin of
/// `targets` is spread evenly across folds.
pub fn stratified_folds<R: Rng>(targets: &[f64], k: usize, bins: usize, rng: &mut R) -> Vec<usize> {
    let n = targets.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| targets[a].total_cmp(&targets[b]).then(a.cmp(&b)));
    let mut assign = vec![0; n];
    let mut counter = 0;
    for b in 0..bins {
        let lo = b * n / bins;
        let hi = (b + 1) * n / bins;
        let mut members = order[lo..hi].to_vec();
        members.shuffle(rng);
        for i in members {
            assign[i] = counter % k;
            counter += 1;
        }
    }
    assign
}

fn rho_or_zero(xs: &[f64], ys: &[f64]) -> f64 {
    spearman(xs, ys).unwrap_or(0.0)
}

fn pick(xs: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| xs[i]).collect()
}

fn split(assign: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k];
    for (i, &f) in assign.iter().enumerate() {
        folds[f].push(i);
    }
    folds
}

struct RepeatSplit {
    outer: Vec<Vec<usize>>,
    /// Per outer fold: inner validation folds as indices into the full data.
    inner: Vec<Vec<Vec<usize>>>,
}

fn draw_split(ratings: &[f64], cfg: &CvConfig, repeat: usize) -> Result<RepeatSplit, EvalError> {
    let mut rng = stream_rng(cfg.seed, repeat as u64);
    let outer = split(&stratified_folds(ratings, cfg.outer_folds, cfg.strat_bins, &mut rng), cfg.outer_folds);
    let mut inner = Vec::with_capacity(outer.len());
    for (f, test) in outer.iter().enumerate() {
        if test.len() < 3 {
            return Err(EvalError::Config(format!("outer fold {f} has {} images; Spearman needs 3", test.len())));
        }
        let train: Vec<usize> = outer.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, v)| v.iter().copied()).collect();
        let train_ratings = pick(ratings, &train);
        let inner_assign = stratified_folds(&train_ratings, cfg.inner_folds, cfg.strat_bins, &mut rng);
        let folds: Vec<Vec<usize>> = split(&inner_assign, cfg.inner_folds)
            .into_iter()
            .map(|v| v.into_iter().map(|j| train[j]).collect())
            .collect();
        if let Some(small) = folds.iter().find(|v| v.len() < 3) {
            return Err(EvalError::Config(format!("inner fold with {} images; Spearman needs 3", small.len())));
        }
        inner.push(folds);
    }
    Ok(RepeatSplit { outer, inner })
}

fn inner_objective(
    features: &[ImageFeatures],
    ratings: &[f64],
    folds: &[Vec<usize>],
    params: &ScoreParams,
    weights: &CaptureWeights,
    channel: NoveltyChannel,
) -> f64 {
    let total: f64 = folds
        .iter()
        .map(|idx| {
            let s: Vec<f64> = idx.iter().map(|&i| score_one(&features[i], params, weights, channel)).collect();
            rho_or_zero(&s, &pick(ratings, idx))
        })
        .sum();
    total / folds.len() as f64
}

/// Coordinate ascent: novelty threshold first, then each emotion in
/// category order. A candidate replaces the incumbent only on strict
/// improvement, so earlier grid values win ties.
fn search(
    features: &[ImageFeatures],
    ratings: &[f64],
    folds: &[Vec<usize>],
    weights: &CaptureWeights,
    cfg: &CvConfig,
) -> ScoreParams {
    let channel = cfg.novelty_channel;
    let mut best = cfg.initial;
    let mut best_obj = inner_objective(features, ratings, folds, &best, weights, channel);
    let search_novelty = channel == NoveltyChannel::Thresholded && weights.novelty() > 0.0;
    let search_emotion = weights.emotion() > 0.0;
    for _ in 0..cfg.passes {
        let mut improved = false;
        if search_novelty {
            for &t in &cfg.novelty_grid {
                let cand = ScoreParams { novelty_threshold: t, ..best };
                let obj = inner_objective(features, ratings, folds, &cand, weights, channel);
                if obj > best_obj {
                    best = cand;
                    best_obj = obj;
                    improved = true;
                }
            }
        }
        if search_emotion {
            for e in Emotion::ALL {
                for &t in &cfg.threshold_grid {
                    let cand = ScoreParams {
                        thresholds: best.thresholds.with(e, t).expect("grid validated"),
                        ..best
                    };
                    let obj = inner_objective(features, ratings, folds, &cand, weights, channel);
                    if obj > best_obj {
                        best = cand;
                        best_obj = obj;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    best
}

fn fold_outcome(repeat: usize, fold: usize, scores: &[f64], ratings: &[f64], params: Option<ScoreParams>) -> FoldOutcome {
    let (rho, p) = spearman_pvalue(scores, ratings).unwrap_or((0.0, 1.0));
    FoldOutcome { repeat, fold, size: scores.len(), rho, p, params }
}

fn summarize(folds: Vec<FoldOutcome>) -> Result<CvSummary, EvalError> {
    let n = folds.len() as f64;
    let mean_rho = folds.iter().map(|f| f.rho).sum::<f64>() / n;
    let std_rho = if folds.len() > 1 {
        (folds.iter().map(|f| (f.rho - mean_rho).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let ps: Vec<f64> = folds.iter().map(|f| f.p).collect();
    let fisher_p = fisher_combined(&ps)?;
    Ok(CvSummary { mean_rho, std_rho, fisher_p, folds })
}

fn check_inputs(n_features: usize, ratings: &[f64], cfg: &CvConfig) -> Result<(), EvalError> {
    cfg.validate()?;
    if n_features != ratings.len() {
        return Err(EvalError::Schema(format!("{n_features} feature rows for {} ratings", ratings.len())));
    }
    if ratings.iter().any(|r| !r.is_finite()) {
        return Err(EvalError::Schema("non-finite rating".into()));
    }
    if ratings.len() < 3 * cfg.outer_folds {
        return Err(EvalError::Config(format!(
            "{} images cannot fill {} outer folds of at least 3",
            ratings.len(),
            cfg.outer_folds
        )));
    }
    Ok(())
}

/// Nested CV of every weight configuration in `cfg.weight_grid`. All
/// configurations share the same splits within a repeat.
pub fn nested_cv_memorability(
    features: &[ImageFeatures],
    ratings: &[f64],
    cfg: &CvConfig,
) -> Result<Vec<WeightResult>, EvalError> {
    check_inputs(features.len(), ratings, cfg)?;
    let per_repeat: Vec<Vec<Vec<FoldOutcome>>> = (0..cfg.repeats)
        .into_par_iter()
        .map(|repeat| {
            let sp = draw_split(ratings, cfg, repeat)?;
            let rows = cfg
                .weight_grid
                .iter()
                .map(|w| {
                    sp.outer
                        .iter()
                        .enumerate()
                        .map(|(f, test)| {
                            let params = search(features, ratings, &sp.inner[f], w, cfg);
                            let s: Vec<f64> =
                                test.iter().map(|&i| score_one(&features[i], &params, w, cfg.novelty_channel)).collect();
                            fold_outcome(repeat, f, &s, &pick(ratings, test), Some(params))
                        })
                        .collect()
                })
                .collect();
            Ok(rows)
        })
        .collect::<Result<_, EvalError>>()?;

    cfg.weight_grid
        .iter()
        .enumerate()
        .map(|(w, weights)| {
            let folds: Vec<FoldOutcome> = per_repeat.iter().flat_map(|r| r[w].iter().cloned()).collect();
            Ok(WeightResult { weights: *weights, summary: summarize(folds)? })
        })
        .collect()
}

/// Evaluates parameter-free scores on the same outer splits as
/// [`nested_cv_memorability`]. `scores_for_repeat` may return fresh scores
/// per repeat (e.g. a random baseline).
pub fn evaluate_fixed_scores<F>(ratings: &[f64], cfg: &CvConfig, scores_for_repeat: F) -> Result<CvSummary, EvalError>
where
    F: Fn(usize) -> Vec<f64> + Sync,
{
    check_inputs(ratings.len(), ratings, cfg)?;
    let per_repeat: Vec<Vec<FoldOutcome>> = (0..cfg.repeats)
        .into_par_iter()
        .map(|repeat| {
            let scores = scores_for_repeat(repeat);
            if scores.len() != ratings.len() {
                return Err(EvalError::Schema(format!("{} scores for {} ratings", scores.len(), ratings.len())));
            }
            let sp = draw_split(ratings, cfg, repeat)?;
            Ok(sp
                .outer
                .iter()
                .enumerate()
                .map(|(f, test)| fold_outcome(repeat, f, &pick(&scores, test), &pick(ratings, test), None))
                .collect())
        })
        .collect::<Result<_, EvalError>>()?;
    summarize(per_repeat.into_iter().flatten().collect())
}

/// Seeded uniform scores in `[0, 1)`.
pub fn baseline_random(n_images: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_images).map(|_| rng.random::<f64>()).collect()
}

/// 1 at indices `0, interval, 2*interval, ...`, else 0.
pub fn baseline_interval(n_images: usize, interval: usize) -> Result<Vec<f64>, EvalError> {
    if interval == 0 {
        return Err(EvalError::Config("interval must be at least 1".into()));
    }
    Ok((0..n_images).map(|i| if i % interval == 0 { 1.0 } else { 0.0 }).collect())
}
