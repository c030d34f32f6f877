//! Hybrid episode/scene retrieval.
//!
//! The query is embedded by both encoders. Episodes are scored by text
//! cosine; scenes by a convex mix of image cosine (multimodal space) and
//! caption cosine (text space). Each pool is z-score normalized on its own,
//! the two normalized winners are compared, and the losing modality
//! contributes the item whose timestamp is nearest the winner's.
//!
//! Tie rules, all deterministic:
//! - within a pool, the first maximal item in insertion order wins;
//! - the episode pool wins when its normalized winner is strictly greater,
//!   and also when both normalized winners are exactly zero (e.g. two
//!   singleton pools); every other tie goes to the scene pool;
//! - equal timestamp distances resolve to the earlier record.
//!
//! A scene with no caption embedding takes the pool's minimum raw caption
//! similarity for its caption term (zero if no scene has a caption).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoders::{EncoderError, MultimodalEncoder, TextEncoder};
use crate::store::{EpisodeId, SceneId, Store, StoreError, UserId};
use crate::vector::{argmax, cosine_unchecked, zscore_normalize, Timestamp, VectorError, DEFAULT_EPSILON};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("user {0} has no stored memories")]
    NoMemories(UserId),
    #[error("invalid retrieval configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Vector(#[from] VectorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    alpha: f64,
    epsilon: f64,
}

impl RetrievalConfig {
    pub fn new(alpha: f64, epsilon: f64) -> Result<Self, RetrievalError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(RetrievalError::Config(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(RetrievalError::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { alpha, epsilon })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { alpha: 0.7, epsilon: DEFAULT_EPSILON }
    }
}

/// `alpha * s_img + (1 - alpha) * s_desc`.
pub fn scene_similarity(s_img: f64, s_desc: f64, alpha: f64) -> f64 {
    alpha * s_img + (1.0 - alpha) * s_desc
}

/// Late fusion of two pool-normalized unimodal scores:
/// `alpha * image + (1 - alpha) * text`.
pub fn fuse_scores(sim_img_norm: f64, sim_text_norm: f64, alpha: f64) -> f64 {
    alpha * sim_img_norm + (1.0 - alpha) * sim_text_norm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Episode,
    Scene,
}

/// One candidate in a score pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolEntry {
    pub timestamp: Timestamp,
    pub score: f64,
}

/// Indices chosen from the two pools plus their normalized scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSelection {
    pub winner: Modality,
    pub episode: Option<usize>,
    pub scene: Option<usize>,
    pub episode_normalized: Vec<f64>,
    pub scene_normalized: Vec<f64>,
}

/// Pool-level core of the retrieval procedure, independent of encoders and
/// storage. Returns `None` when both pools are empty.
pub fn select_pair(episodes: &[PoolEntry], scenes: &[PoolEntry], epsilon: f64) -> Result<Option<PairSelection>, VectorError> {
    let norm = |pool: &[PoolEntry]| -> Result<Vec<f64>, VectorError> {
        if pool.is_empty() {
            Ok(Vec::new())
        } else {
            zscore_normalize(&pool.iter().map(|e| e.score).collect::<Vec<_>>(), epsilon)
        }
    };
    let ep_z = norm(episodes)?;
    let sc_z = norm(scenes)?;
    let best_ep = argmax(&ep_z);
    let best_sc = argmax(&sc_z);

    let (winner, episode, scene) = match (best_ep, best_sc) {
        (None, None) => return Ok(None),
        (Some(i), None) => (Modality::Episode, Some(i), None),
        (None, Some(j)) => (Modality::Scene, None, Some(j)),
        (Some(i), Some(j)) => {
            let (a, b) = (ep_z[i], sc_z[j]);
            if a > b || (a == 0.0 && b == 0.0) {
                (Modality::Episode, Some(i), nearest_in_time(scenes, episodes[i].timestamp))
            } else {
                (Modality::Scene, nearest_in_time(episodes, scenes[j].timestamp), Some(j))
            }
        }
    };
    Ok(Some(PairSelection {
        winner,
        episode,
        scene,
        episode_normalized: ep_z,
        scene_normalized: sc_z,
    }))
}

/// Index minimizing `|t - target|`; ties go to the earlier timestamp, then
/// to the lower index.
pub fn nearest_in_time(pool: &[PoolEntry], target: Timestamp) -> Option<usize> {
    pool.iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.timestamp
                .distance(target)
                .cmp(&b.timestamp.distance(target))
                .then(a.timestamp.cmp(&b.timestamp))
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit<Id> {
    pub id: Id,
    pub timestamp: Timestamp,
    pub raw_score: f64,
    pub normalized_score: f64,
    /// True for the item chosen by timestamp proximity rather than score.
    pub paired_by_timestamp: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub winner: Modality,
    pub episode: Option<Hit<EpisodeId>>,
    pub scene: Option<Hit<SceneId>>,
    /// Set when one of the user's pools was empty.
    pub degraded: bool,
}

/// Raw per-scene scores before pool normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneScores {
    pub image: f64,
    pub caption: Option<f64>,
}

/// Combines image and caption similarities, filling missing caption terms
/// with the pool minimum.
pub fn scene_pool_scores(raw: &[SceneScores], alpha: f64) -> Vec<f64> {
    let fill = raw
        .iter()
        .filter_map(|s| s.caption)
        .min_by(f64::total_cmp)
        .unwrap_or(0.0);
    raw.iter()
        .map(|s| scene_similarity(s.image, s.caption.unwrap_or(fill), alpha))
        .collect()
}

/// Retrieves the best (episode, scene) memory pair for `query`.
pub fn hybrid_retrieve(
    query: &str,
    user: &UserId,
    cfg: &RetrievalConfig,
    store: &Store,
    text_encoder: &dyn TextEncoder,
    mm_encoder: &dyn MultimodalEncoder,
) -> Result<RetrievalResult, RetrievalError> {
    if !store.contains_user(user) {
        return Err(StoreError::UnknownUser(user.clone()).into());
    }
    let q_text = text_encoder.encode_one(query)?;
    let q_mm = mm_encoder.encode_query(query)?;
    let m = store.manifest();
    for (field, expected, actual) in [
        ("text query embedding", m.embedding_dim_text, q_text.dim()),
        ("multimodal query embedding", m.embedding_dim_mm, q_mm.dim()),
    ] {
        if expected != actual {
            return Err(StoreError::Dimension { field, expected, actual }.into());
        }
    }

    let episodes: Vec<_> = store.episodes_of(user).collect();
    let scenes: Vec<_> = store.scenes_of(user).collect();

    let ep_pool: Vec<PoolEntry> = episodes
        .iter()
        .map(|e| PoolEntry { timestamp: e.timestamp, score: cosine_unchecked(&q_text, &e.text_embedding) })
        .collect();
    let raw: Vec<SceneScores> = scenes
        .iter()
        .map(|s| SceneScores {
            image: cosine_unchecked(&q_mm, &s.scene_embedding),
            caption: s.caption_embedding.as_ref().map(|c| cosine_unchecked(&q_text, c)),
        })
        .collect();
    let sc_pool: Vec<PoolEntry> = scene_pool_scores(&raw, cfg.alpha)
        .into_iter()
        .zip(&scenes)
        .map(|(score, s)| PoolEntry { timestamp: s.timestamp, score })
        .collect();

    let sel = select_pair(&ep_pool, &sc_pool, cfg.epsilon)?
        .ok_or_else(|| RetrievalError::NoMemories(user.clone()))?;

    let episode = sel.episode.map(|i| Hit {
        id: episodes[i].id,
        timestamp: episodes[i].timestamp,
        raw_score: ep_pool[i].score,
        normalized_score: sel.episode_normalized[i],
        paired_by_timestamp: sel.winner == Modality::Scene,
    });
    let scene = sel.scene.map(|j| Hit {
        id: scenes[j].id,
        timestamp: scenes[j].timestamp,
        raw_score: sc_pool[j].score,
        normalized_score: sel.scene_normalized[j],
        paired_by_timestamp: sel.winner == Modality::Episode,
    });
    Ok(RetrievalResult {
        winner: sel.winner,
        degraded: episode.is_none() || scene.is_none(),
        episode,
        scene,
    })
}
