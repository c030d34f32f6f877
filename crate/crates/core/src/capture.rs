//! The selective-memory gate.
//!
//! A frame is memorable when its emotional salience is positive, when it is
//! the user's first scene, or when its novelty exceeds the novelty
//! threshold. Memorable frames are captioned, the caption is embedded, and
//! the resulting scene is persisted.
//!
//! MemScore, the weighted sum of emotion, novelty and complexity channels,
//! is recorded as diagnostic metadata only; the binary gate decides storage.
//! Channels are harmonized to `[0, 1]`: the emotion channel is the frame
//! salience, and the novelty channel is `max(0, (n - T_n) / (2 - T_n))`,
//! mirroring the threshold normalization used for emotions over the
//! `[0, 2]` cosine-distance range. A first scene counts as fully novel.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoders::{SceneDescriber, TextEncoder};
use crate::novelty::{novelty_score, Novelty, NoveltyConfig, NoveltyError};
use crate::salience::{frame_salience, EmotionThresholds, EmotionVector};
use crate::store::{NewScene, SceneId, Store, StoreError, UserId};
use crate::vector::{Embedding, Timestamp};

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("invalid capture configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Novelty(#[from] NoveltyError),
    #[error(transparent)]
    Storage(#[from] StoreError),
    #[error("frame at {frame} precedes the last stored scene at {last} for user {user}")]
    OutOfOrder {
        user: UserId,
        frame: Timestamp,
        last: Timestamp,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Emotion,
    Novelty,
    FirstScene,
}

impl std::fmt::Display for Trigger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Trigger::Emotion => "emotion",
            Trigger::Novelty => "novelty",
            Trigger::FirstScene => "first_scene",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureDecision {
    pub memorable: bool,
    pub salience: f64,
    pub novelty: Novelty,
    #[serde(default)]
    pub mem_score: Option<f64>,
    pub triggered_by: BTreeSet<Trigger>,
}

/// Evaluates the gate. `triggered_by` lists every condition that holds.
pub fn decide_memorable(salience: f64, novelty: Novelty, novelty_threshold: f64) -> CaptureDecision {
    let mut triggered_by = BTreeSet::new();
    if salience > 0.0 {
        triggered_by.insert(Trigger::Emotion);
    }
    match novelty {
        Novelty::FirstScene => {
            triggered_by.insert(Trigger::FirstScene);
        }
        Novelty::Distance(d) if d > novelty_threshold => {
            triggered_by.insert(Trigger::Novelty);
        }
        Novelty::Distance(_) => {}
    }
    CaptureDecision {
        memorable: !triggered_by.is_empty(),
        salience,
        novelty,
        mem_score: None,
        triggered_by,
    }
}

/// Non-negative channel weights summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct CaptureWeights {
    emotion: f64,
    novelty: f64,
    complexity: f64,
}

impl CaptureWeights {
    pub fn new(emotion: f64, novelty: f64, complexity: f64) -> Result<Self, CaptureError> {
        let ws = [emotion, novelty, complexity];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CaptureError::Config(format!("weights must be non-negative, got {ws:?}")));
        }
        let sum: f64 = ws.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CaptureError::Config(format!("weights must sum to 1, got {sum}")));
        }
        Ok(Self { emotion, novelty, complexity })
    }

    pub fn emotion(&self) -> f64 {
        self.emotion
    }

    pub fn novelty(&self) -> f64 {
        self.novelty
    }

    pub fn complexity(&self) -> f64 {
        self.complexity
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.emotion, self.novelty, self.complexity]
    }
}

impl Default for CaptureWeights {
    fn default() -> Self {
        Self { emotion: 0.5, novelty: 0.5, complexity: 0.0 }
    }
}

impl TryFrom<[f64; 3]> for CaptureWeights {
    type Error = CaptureError;
    fn try_from(w: [f64; 3]) -> Result<Self, Self::Error> {
        Self::new(w[0], w[1], w[2])
    }
}

impl From<CaptureWeights> for [f64; 3] {
    fn from(w: CaptureWeights) -> Self {
        w.as_array()
    }
}

impl std::fmt::Display for CaptureWeights {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({:.1}, {:.1}, {:.1})", self.emotion, self.novelty, self.complexity)
    }
}

pub fn mem_score(s_e: f64, s_n: f64, s_c: f64, w: &CaptureWeights) -> f64 {
    w.emotion * s_e + w.novelty * s_n + w.complexity * s_c
}

/// Thresholded novelty channel in `[0, 1]`.
pub fn novelty_channel(novelty: Novelty, threshold: f64) -> f64 {
    match novelty {
        Novelty::FirstScene => 1.0,
        Novelty::Distance(d) if threshold < 2.0 => ((d - threshold) / (2.0 - threshold)).max(0.0),
        Novelty::Distance(_) => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CaptureConfig {
    pub thresholds: EmotionThresholds,
    pub novelty: NoveltyConfig,
    pub weights: CaptureWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameInput {
    pub user_id: UserId,
    pub timestamp: Timestamp,
    pub scene_embedding: Embedding,
    pub emotions: EmotionVector,
    pub complexity: Option<f64>,
    pub image_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureOutcome {
    pub decision: CaptureDecision,
    pub stored: Option<SceneId>,
    /// Why the caption is empty, when the describer or encoder failed.
    pub caption_error: Option<String>,
}

/// Runs one frame through the gate and, when memorable, persists it.
///
/// Novelty is measured against all scenes already stored for the user.
/// Frames must arrive in non-decreasing timestamp order per user.
pub fn capture_frame(
    frame: &FrameInput,
    cfg: &CaptureConfig,
    store: &mut Store,
    describer: &dyn SceneDescriber,
    text_encoder: &dyn TextEncoder,
) -> Result<CaptureOutcome, CaptureError> {
    if !store.contains_user(&frame.user_id) {
        return Err(StoreError::UnknownUser(frame.user_id.clone()).into());
    }
    if let Some(last) = store.scenes_of(&frame.user_id).map(|s| s.timestamp).max() {
        if frame.timestamp < last {
            return Err(CaptureError::OutOfOrder {
                user: frame.user_id.clone(),
                frame: frame.timestamp,
                last,
            });
        }
    }

    let salience = frame_salience(&frame.emotions, &cfg.thresholds);
    let novelty = novelty_score(
        &frame.scene_embedding,
        store.scenes_of(&frame.user_id).map(|s| &s.scene_embedding),
    )?;
    let mut decision = decide_memorable(salience, novelty, cfg.novelty.threshold());
    decision.mem_score = Some(mem_score(
        salience,
        novelty_channel(novelty, cfg.novelty.threshold()),
        frame.complexity.unwrap_or(0.0).clamp(0.0, 1.0),
        &cfg.weights,
    ));
    if !decision.memorable {
        return Ok(CaptureOutcome { decision, stored: None, caption_error: None });
    }

    let (caption, caption_embedding, caption_error) = describe(frame, describer, text_encoder);
    let id = store.put_scene(NewScene {
        user_id: frame.user_id.clone(),
        timestamp: frame.timestamp,
        scene_embedding: frame.scene_embedding.clone(),
        caption,
        caption_embedding,
        image_ref: frame.image_ref.clone(),
        capture: decision.clone(),
    })?;
    Ok(CaptureOutcome { decision, stored: Some(id), caption_error })
}

fn describe(
    frame: &FrameInput,
    describer: &dyn SceneDescriber,
    text_encoder: &dyn TextEncoder,
) -> (String, Option<Embedding>, Option<String>) {
    let Some(image_ref) = frame.image_ref.as_deref() else {
        return (String::new(), None, Some("frame has no image reference".into()));
    };
    let caption = match describer.describe(image_ref) {
        Ok(c) if !c.trim().is_empty() => c,
        Ok(_) => return (String::new(), None, Some("describer returned an empty caption".into())),
        Err(e) => return (String::new(), None, Some(e.to_string())),
    };
    match text_encoder.encode_one(&caption) {
        Ok(e) => (caption, Some(e), None),
        Err(e) => (String::new(), None, Some(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{EncoderError, SyntheticDescriber, SyntheticTextEncoder};
    use crate::salience::Emotion;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    #[test]
    fn gate_examples() {
        let d = decide_memorable(0.0, Novelty::Distance(0.2), 0.5);
        assert!(!d.memorable);
        assert!(d.triggered_by.is_empty());

        let d = decide_memorable(0.1, Novelty::Distance(0.0), 0.5);
        assert!(d.memorable);
        assert_eq!(d.triggered_by, BTreeSet::from([Trigger::Emotion]));

        let d = decide_memorable(0.0, Novelty::FirstScene, 2.0);
        assert_eq!(d.triggered_by, BTreeSet::from([Trigger::FirstScene]));

        let d = decide_memorable(0.3, Novelty::Distance(0.9), 0.5);
        assert_eq!(d.triggered_by, BTreeSet::from([Trigger::Emotion, Trigger::Novelty]));
        // strict inequality on novelty
        assert!(!decide_memorable(0.0, Novelty::Distance(0.5), 0.5).memorable);
    }

    #[test]
    fn mem_score_examples() {
        let w = CaptureWeights::new(1.0, 0.0, 0.0).unwrap();
        assert!((mem_score(0.37, 0.9, 0.9, &w) - 0.37).abs() < 1e-9);
        let w = CaptureWeights::new(0.5, 0.5, 0.0).unwrap();
        assert!((mem_score(0.4, 0.6, 0.0, &w) - 0.5).abs() < 1e-9);
        let w = CaptureWeights::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(mem_score(0.8, 0.8, 0.0, &w), 0.0);

        assert!(CaptureWeights::new(0.5, 0.4, 0.0).is_err());
        assert!(CaptureWeights::new(1.5, -0.5, 0.0).is_err());
        assert!(serde_json::from_str::<CaptureWeights>("[0.2, 0.2, 0.2]").is_err());
    }

    #[test]
    fn novelty_channel_harmonization() {
        assert_eq!(novelty_channel(Novelty::FirstScene, 0.4), 1.0);
        assert_eq!(novelty_channel(Novelty::Distance(0.2), 0.4), 0.0);
        assert!((novelty_channel(Novelty::Distance(1.2), 0.4) - 0.5).abs() < 1e-12);
        assert_eq!(novelty_channel(Novelty::Distance(2.0), 2.0), 0.0);
    }

    struct Failing;
    impl SceneDescriber for Failing {
        fn describe(&self, r: &str) -> Result<String, EncoderError> {
            Err(EncoderError::Describer(format!("cannot read {r}")))
        }
    }

    fn setup() -> (Store, UserId, SyntheticTextEncoder) {
        let mut store = Store::in_memory(16, 3).unwrap();
        let date = NaiveDate::from_ymd_opt(2025, 10, 8).unwrap();
        let user = store.create_user("Alice", None, date).unwrap();
        (store, user, SyntheticTextEncoder::new(1, 16, 0.5).unwrap())
    }

    fn frame(user: &UserId, t: u64, v: [f32; 3], emotions: EmotionVector) -> FrameInput {
        FrameInput {
            user_id: user.clone(),
            timestamp: Timestamp(t),
            scene_embedding: Embedding::new(v.to_vec()).unwrap(),
            emotions,
            complexity: None,
            image_ref: Some("dog-park/1".into()),
        }
    }

    #[test]
    fn capture_examples() {
        let (mut store, user, enc) = setup();
        let cfg = CaptureConfig::default();
        let desc = SyntheticDescriber::new(1);

        let first = capture_frame(&frame(&user, 1, [1., 0., 0.], EmotionVector::zeros()), &cfg, &mut store, &desc, &enc).unwrap();
        assert_eq!(first.decision.triggered_by, BTreeSet::from([Trigger::FirstScene]));
        let stored = store.scene(first.stored.unwrap()).unwrap();
        assert!(stored.caption.starts_with("dog-park"));
        assert!(stored.caption_embedding.is_some());

        let dup = capture_frame(&frame(&user, 2, [1., 0., 0.], EmotionVector::zeros()), &cfg, &mut store, &desc, &enc).unwrap();
        assert!(dup.stored.is_none());
        assert_eq!(store.scene_count(), 1);

        let cfg = CaptureConfig {
            thresholds: EmotionThresholds::uniform(0.95).unwrap().with(Emotion::Happy, 0.6).unwrap(),
            ..cfg
        };
        let happy = EmotionVector::single(Emotion::Happy, 0.9).unwrap();
        let out = capture_frame(&frame(&user, 3, [1., 0., 0.], happy), &cfg, &mut store, &desc, &enc).unwrap();
        assert!((out.decision.salience - 0.75).abs() < 1e-9);
        assert_eq!(out.decision.triggered_by, BTreeSet::from([Trigger::Emotion]));
        assert!(out.stored.is_some());

        let late = capture_frame(&frame(&user, 0, [0., 1., 0.], EmotionVector::zeros()), &cfg, &mut store, &desc, &enc);
        assert!(matches!(late, Err(CaptureError::OutOfOrder { .. })));
    }

    #[test]
    fn describer_failure_still_stores() {
        let (mut store, user, enc) = setup();
        let out = capture_frame(
            &frame(&user, 1, [0., 0., 1.], EmotionVector::zeros()),
            &CaptureConfig::default(),
            &mut store,
            &Failing,
            &enc,
        )
        .unwrap();
        let s = store.scene(out.stored.unwrap()).unwrap();
        assert_eq!(s.caption, "");
        assert!(s.caption_embedding.is_none());
        assert!(out.caption_error.unwrap().contains("cannot read"));
    }

    #[test]
    fn unknown_user_is_storage_error() {
        let (mut store, _, enc) = setup();
        let ghost: UserId = "240101_0009".parse().unwrap();
        let r = capture_frame(
            &frame(&ghost, 1, [1., 0., 0.], EmotionVector::zeros()),
            &CaptureConfig::default(),
            &mut store,
            &SyntheticDescriber::new(0),
            &enc,
        );
        assert!(matches!(r, Err(CaptureError::Storage(StoreError::UnknownUser(_)))));
    }

    proptest! {
        #[test]
        fn mem_score_monotone(
            se in 0.0f64..=1.0, sn in 0.0f64..=1.0, sc in 0.0f64..=1.0, bump in 0.0f64..0.5,
            we in 0.0f64..1.0, wn_frac in 0.0f64..1.0,
        ) {
            let wn = (1.0 - we) * wn_frac;
            let w = CaptureWeights::new(we, wn, 1.0 - we - wn).unwrap();
            let base = mem_score(se, sn, sc, &w);
            prop_assert!(mem_score((se + bump).min(1.0), sn, sc, &w) >= base);
            prop_assert!(mem_score(se, (sn + bump).min(1.0), sc, &w) >= base);
            prop_assert!(mem_score(se, sn, (sc + bump).min(1.0), &w) >= base);
        }

        #[test]
        fn complexity_ignored_without_weight(se in 0.0f64..=1.0, sn in 0.0f64..=1.0, sc in 0.0f64..=1.0, sc2 in 0.0f64..=1.0, we in 0.0f64..=1.0) {
            let w = CaptureWeights::new(we, 1.0 - we, 0.0).unwrap();
            prop_assert_eq!(mem_score(se, sn, sc, &w), mem_score(se, sn, sc2, &w));
        }

        #[test]
        fn gate_store_consistency(
            frames in prop::collection::vec((prop::array::uniform3(-1.0f32..1.0), 0.0f64..1.0), 1..12),
            t_n in 0.0f64..1.0,
        ) {
            let (mut store, user, enc) = setup();
            let cfg = CaptureConfig {
                thresholds: EmotionThresholds::uniform(0.7).unwrap(),
                novelty: NoveltyConfig::new(t_n).unwrap(),
                weights: CaptureWeights::default(),
            };
            for (i, (v, happy)) in frames.iter().enumerate() {
                prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
                let before = store.scene_count();
                let f = frame(&user, i as u64, *v, EmotionVector::single(Emotion::Happy, *happy).unwrap());
                let out = capture_frame(&f, &cfg, &mut store, &SyntheticDescriber::new(0), &enc).unwrap();
                prop_assert_eq!(out.decision.memorable, out.stored.is_some());
                prop_assert_eq!(store.scene_count(), before + usize::from(out.decision.memorable));
            }
        }
    }
}
