//! Recall@K for image, caption and fused retrieval.
//!
//! For each query the gallery is scored twice: query multimodal embedding
//! against image embeddings, and query text embedding against caption
//! embeddings. Each score list is normalized over the gallery and the two
//! are fused as `alpha * image + (1 - alpha) * text`. Unimodal rankings use
//! the same normalized scores, so the fusion endpoints reproduce them
//! exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::encoders::{
    concept_label, MultimodalEncoder, SceneDescriber, SyntheticWorld, SyntheticWorldConfig, TextEncoder,
};
use crate::retrieval::fuse_scores;
use crate::vector::{cosine_unchecked, zscore_normalize, Embedding, DEFAULT_EPSILON};

/// Percentage of queries whose true item is among the first `k` of its ranking.
pub fn recall_at_k(rankings: &[Vec<usize>], truth: &[usize], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::Config("k must be at least 1".into()));
    }
    if rankings.len() != truth.len() {
        return Err(EvalError::Schema(format!("{} rankings for {} ground-truth entries", rankings.len(), truth.len())));
    }
    if truth.is_empty() {
        return Err(EvalError::Schema("no queries".into()));
    }
    let hits = rankings
        .iter()
        .zip(truth)
        .filter(|(r, t)| r.iter().take(k).any(|i| i == *t))
        .count();
    Ok(100.0 * hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    ZScore,
    MinMax,
}

impl Normalization {
    fn apply(self, xs: &[f64]) -> Vec<f64> {
        match self {
            Normalization::ZScore => zscore_normalize(xs, DEFAULT_EPSILON).expect("gallery is non-empty"),
            Normalization::MinMax => {
                let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                xs.iter().map(|x| (x - lo) / (hi - lo + DEFAULT_EPSILON)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub dim: usize,
    pub gallery_size: usize,
    pub image_noise: f64,
    pub text_noise: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self { seed: 0, dim: 64, gallery_size: 500, image_noise: 1.5, text_noise: 1.5 }
    }
}

/// Pre-encoded queries and gallery; query `q` targets gallery item `truth[q]`.
#[derive(Debug, Clone)]
pub struct BenchmarkInstance {
    pub queries: Vec<String>,
    pub query_text: Vec<Embedding>,
    pub query_mm: Vec<Embedding>,
    pub gallery_refs: Vec<String>,
    pub gallery_image: Vec<Embedding>,
    pub gallery_caption: Vec<Embedding>,
    pub truth: Vec<usize>,
}

impl BenchmarkInstance {
    /// Encodes a gallery of image references and one query per target.
    pub fn encode(
        gallery_refs: Vec<String>,
        queries: Vec<String>,
        truth: Vec<usize>,
        text: &dyn TextEncoder,
        mm: &dyn MultimodalEncoder,
        describer: &dyn SceneDescriber,
    ) -> Result<Self, EvalError> {
        if queries.len() != truth.len() || queries.is_empty() || gallery_refs.is_empty() {
            return Err(EvalError::Schema("need matching, non-empty queries and truth, and a gallery".into()));
        }
        if let Some(t) = truth.iter().find(|t| **t >= gallery_refs.len()) {
            return Err(EvalError::Schema(format!("truth index {t} outside a gallery of {}", gallery_refs.len())));
        }
        let gallery_image = gallery_refs.iter().map(|r| mm.encode_image(r)).collect::<Result<Vec<_>, _>>()?;
        let captions = gallery_refs.iter().map(|r| describer.describe(r)).collect::<Result<Vec<_>, _>>()?;
        let gallery_caption = text.encode_text(&captions.iter().map(String::as_str).collect::<Vec<_>>())?;
        let query_text = text.encode_text(&queries.iter().map(String::as_str).collect::<Vec<_>>())?;
        let query_mm = queries.iter().map(|q| mm.encode_query(q)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { queries, query_text, query_mm, gallery_refs, gallery_image, gallery_caption, truth })
    }

    /// One concept per gallery item and one query per item.
    pub fn synthetic(cfg: &BenchmarkConfig) -> Result<Self, EvalError> {
        let world = SyntheticWorld::new(SyntheticWorldConfig {
            seed: cfg.seed,
            dim: cfg.dim,
            concept_count: cfg.gallery_size,
            image_noise: cfg.image_noise,
            text_noise: cfg.text_noise,
            min_separation: 0.0,
        })?;
        let labels: Vec<String> = (0..cfg.gallery_size).map(concept_label).collect();
        let refs = labels.iter().map(|l| format!("{l}/0")).collect();
        let queries = labels.iter().enumerate().map(|(i, l)| world.query_text(l, &format!("q{i}"))).collect();
        Self::encode(
            refs,
            queries,
            (0..cfg.gallery_size).collect(),
            world.text_encoder(),
            world.multimodal_encoder(),
            world.describer(),
        )
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Normalized (image, text) score lists of query `q` over the gallery.
    pub fn normalized_scores(&self, q: usize, norm: Normalization) -> (Vec<f64>, Vec<f64>) {
        let img: Vec<f64> = self.gallery_image.iter().map(|g| cosine_unchecked(&self.query_mm[q], g)).collect();
        let txt: Vec<f64> = self.gallery_caption.iter().map(|g| cosine_unchecked(&self.query_text[q], g)).collect();
        (norm.apply(&img), norm.apply(&txt))
    }
}

/// 0-based position of `target` when items are sorted by descending score,
/// lower index first among equal scores.
fn rank_of(scores: &[f64], target: usize) -> usize {
    let s = scores[target];
    scores
        .iter()
        .enumerate()
        .filter(|&(i, &x)| x > s || (x == s && i < target))
        .count()
}

/// Full descending ranking with index tie-break.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallRow {
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
}

impl RecallRow {
    fn from_ranks(ranks: &[usize]) -> Self {
        let at = |k: usize| 100.0 * ranks.iter().filter(|r| **r < k).count() as f64 / ranks.len() as f64;
        Self { r1: at(1), r5: at(5), r10: at(10) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub normalization: Normalization,
    pub image: RecallRow,
    pub text: RecallRow,
    pub fusion: Vec<(f64, RecallRow)>,
    /// Best alpha per metric (first alpha on ties), as (R@1, R@5, R@10).
    pub best_alpha: (f64, f64, f64),
}

impl SweepTable {
    pub fn fusion_at(&self, alpha: f64) -> Option<&RecallRow> {
        self.fusion.iter().find(|(a, _)| *a == alpha).map(|(_, r)| r)
    }

    /// Best fusion R@1 over alphas strictly inside (0, 1).
    pub fn best_interior_r1(&self) -> Option<(f64, f64)> {
        self.fusion
            .iter()
            .filter(|(a, _)| *a > 0.0 && *a < 1.0)
            .fold(None, |best: Option<(f64, f64)>, (a, r)| match best {
                Some((_, b)) if b >= r.r1 => best,
                _ => Some((*a, r.r1)),
            })
    }
}

/// `0.0, 0.1, ..., 1.0`, computed as `i / 10` so the endpoints are exact.
pub fn default_alphas() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Recall@{1,5,10} of image-only, text-only and fused rankings for every alpha.
pub fn alpha_sweep(instance: &BenchmarkInstance, alphas: &[f64], norm: Normalization) -> Result<SweepTable, EvalError> {
    if alphas.is_empty() {
        return Err(EvalError::Config("no alphas to sweep".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(EvalError::Config(format!("alpha {a} outside [0, 1]")));
    }
    // per query: (image rank, text rank, fused rank per alpha)
    let ranks: Vec<(usize, usize, Vec<usize>)> = (0..instance.len())
        .into_par_iter()
        .map(|q| {
            let t = instance.truth[q];
            let (img, txt) = instance.normalized_scores(q, norm);
            let fused = alphas
                .iter()
                .map(|&a| {
                    let f: Vec<f64> = img.iter().zip(&txt).map(|(i, x)| fuse_scores(*i, *x, a)).collect();
                    rank_of(&f, t)
                })
                .collect();
            (rank_of(&img, t), rank_of(&txt, t), fused)
        })
        .collect();

    let image = RecallRow::from_ranks(&ranks.iter().map(|r| r.0).collect::<Vec<_>>());
    let text = RecallRow::from_ranks(&ranks.iter().map(|r| r.1).collect::<Vec<_>>());
    let fusion: Vec<(f64, RecallRow)> = alphas
        .iter()
        .enumerate()
        .map(|(j, &a)| (a, RecallRow::from_ranks(&ranks.iter().map(|r| r.2[j]).collect::<Vec<_>>())))
        .collect();
    let best = |m: fn(&RecallRow) -> f64| {
        fusion
            .iter()
            .fold((fusion[0].0, m(&fusion[0].1)), |(ba, bv), (a, r)| if m(r) > bv { (*a, m(r)) } else { (ba, bv) })
            .0
    };
    let best_alpha = (best(|r| r.r1), best(|r| r.r5), best(|r| r.r10));
    Ok(SweepTable { normalization: norm, image, text, fusion, best_alpha })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recall_examples() {
        let truth = vec![0, 1, 2];
        let first: Vec<Vec<usize>> = truth.iter().map(|&t| vec![t, 9, 8]).collect();
        assert_eq!(recall_at_k(&first, &truth, 1).unwrap(), 100.0);
        let sixth: Vec<Vec<usize>> = truth.iter().map(|&t| vec![10, 11, 12, 13, 14, t, 15]).collect();
        assert_eq!(recall_at_k(&sixth, &truth, 5).unwrap(), 0.0);
        assert_eq!(recall_at_k(&sixth, &truth, 10).unwrap(), 100.0);
        assert!(recall_at_k(&first, &truth[..2], 1).is_err());
        assert!(recall_at_k(&first, &truth, 0).is_err());
    }

    #[test]
    fn rank_of_matches_full_sort() {
        let s = [0.3, 0.9, 0.3, -1.0, 0.9];
        let full = ranking(&s);
        for t in 0..s.len() {
            assert_eq!(rank_of(&s, t), full.iter().position(|&i| i == t).unwrap());
        }
    }

    #[test]
    fn endpoints_equal_unimodal() {
        let cfg = BenchmarkConfig { gallery_size: 60, ..BenchmarkConfig::default() };
        let inst = BenchmarkInstance::synthetic(&cfg).unwrap();
        for norm in [Normalization::ZScore, Normalization::MinMax] {
            let t = alpha_sweep(&inst, &default_alphas(), norm).unwrap();
            assert_eq!(t.fusion_at(0.0).unwrap(), &t.text);
            assert_eq!(t.fusion_at(1.0).unwrap(), &t.image);
        }
    }
}
