//! Per-emotion and frame-level emotional salience.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SalienceError {
    #[error("threshold for {emotion} must lie in [0, 1), got {value}")]
    Threshold { emotion: String, value: f64 },
    #[error("probability for {emotion} must lie in [0, 1], got {value}")]
    Probability { emotion: String, value: f64 },
    #[error("missing emotion category: {0}")]
    MissingCategory(Emotion),
    #[error("unknown emotion category: {0:?}")]
    UnknownCategory(String),
}

/// The eight discrete categories reported by the emotion detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Neutral,
    Happy,
    Sad,
    Surprise,
    Fear,
    Disgust,
    Anger,
    Contempt,
}

impl Emotion {
    pub const ALL: [Emotion; 8] = [
        Emotion::Neutral,
        Emotion::Happy,
        Emotion::Sad,
        Emotion::Surprise,
        Emotion::Fear,
        Emotion::Disgust,
        Emotion::Anger,
        Emotion::Contempt,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Neutral => "neutral",
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Surprise => "surprise",
            Emotion::Fear => "fear",
            Emotion::Disgust => "disgust",
            Emotion::Anger => "anger",
            Emotion::Contempt => "contempt",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = SalienceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        Emotion::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or(SalienceError::UnknownCategory(s))
    }
}

/// Detector output: one probability per category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<Emotion, f64>", into = "BTreeMap<Emotion, f64>")]
pub struct EmotionVector([f64; 8]);

impl EmotionVector {
    pub fn new(probabilities: [f64; 8]) -> Result<Self, SalienceError> {
        for e in Emotion::ALL {
            let p = probabilities[e.index()];
            if !(0.0..=1.0).contains(&p) {
                return Err(SalienceError::Probability {
                    emotion: e.name().into(),
                    value: p,
                });
            }
        }
        Ok(Self(probabilities))
    }

    /// No detected face.
    pub fn zeros() -> Self {
        Self([0.0; 8])
    }

    /// Requires every category to be present.
    pub fn from_map(map: &BTreeMap<Emotion, f64>) -> Result<Self, SalienceError> {
        let mut probs = [0.0; 8];
        for e in Emotion::ALL {
            probs[e.index()] = *map.get(&e).ok_or(SalienceError::MissingCategory(e))?;
        }
        Self::new(probs)
    }

    /// Missing categories are read as zero probability.
    pub fn from_partial(map: &BTreeMap<Emotion, f64>) -> Result<Self, SalienceError> {
        let mut probs = [0.0; 8];
        for (e, p) in map {
            probs[e.index()] = *p;
        }
        Self::new(probs)
    }

    /// A vector with a single non-zero category.
    pub fn single(emotion: Emotion, p: f64) -> Result<Self, SalienceError> {
        let mut probs = [0.0; 8];
        probs[emotion.index()] = p;
        Self::new(probs)
    }

    pub fn get(&self, e: Emotion) -> f64 {
        self.0[e.index()]
    }

    pub fn as_array(&self) -> &[f64; 8] {
        &self.0
    }
}

impl TryFrom<BTreeMap<Emotion, f64>> for EmotionVector {
    type Error = SalienceError;

    fn try_from(map: BTreeMap<Emotion, f64>) -> Result<Self, Self::Error> {
        Self::from_map(&map)
    }
}

impl From<EmotionVector> for BTreeMap<Emotion, f64> {
    fn from(v: EmotionVector) -> Self {
        Emotion::ALL.into_iter().map(|e| (e, v.get(e))).collect()
    }
}

/// Category-specific intensity thresholds, each in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<Emotion, f64>", into = "BTreeMap<Emotion, f64>")]
pub struct EmotionThresholds([f64; 8]);

impl EmotionThresholds {
    pub fn new(thresholds: [f64; 8]) -> Result<Self, SalienceError> {
        for e in Emotion::ALL {
            check_threshold(e.name(), thresholds[e.index()])?;
        }
        Ok(Self(thresholds))
    }

    pub fn uniform(t: f64) -> Result<Self, SalienceError> {
        Self::new([t; 8])
    }

    pub fn from_map(map: &BTreeMap<Emotion, f64>) -> Result<Self, SalienceError> {
        let mut ts = [0.0; 8];
        for e in Emotion::ALL {
            ts[e.index()] = *map.get(&e).ok_or(SalienceError::MissingCategory(e))?;
        }
        Self::new(ts)
    }

    pub fn get(&self, e: Emotion) -> f64 {
        self.0[e.index()]
    }

    pub fn with(mut self, e: Emotion, t: f64) -> Result<Self, SalienceError> {
        check_threshold(e.name(), t)?;
        self.0[e.index()] = t;
        Ok(self)
    }

    pub fn as_array(&self) -> &[f64; 8] {
        &self.0
    }
}

impl Default for EmotionThresholds {
    fn default() -> Self {
        Self([0.6; 8])
    }
}

impl TryFrom<BTreeMap<Emotion, f64>> for EmotionThresholds {
    type Error = SalienceError;

    fn try_from(map: BTreeMap<Emotion, f64>) -> Result<Self, Self::Error> {
        Self::from_map(&map)
    }
}

impl From<EmotionThresholds> for BTreeMap<Emotion, f64> {
    fn from(t: EmotionThresholds) -> Self {
        Emotion::ALL.into_iter().map(|e| (e, t.get(e))).collect()
    }
}

fn check_threshold(name: &str, t: f64) -> Result<(), SalienceError> {
    if !(0.0..1.0).contains(&t) {
        return Err(SalienceError::Threshold {
            emotion: name.into(),
            value: t,
        });
    }
    Ok(())
}

/// Activation above threshold, rescaled so that `p = 1` maps to 1.
pub fn emotion_salience(p: f64, threshold: f64) -> Result<f64, SalienceError> {
    check_threshold("emotion", threshold)?;
    Ok(salience_unchecked(p, threshold))
}

#[inline]
fn salience_unchecked(p: f64, t: f64) -> f64 {
    ((p - t) / (1.0 - t)).max(0.0)
}

/// Maximum per-category salience of a frame.
pub fn frame_salience(emotions: &EmotionVector, thresholds: &EmotionThresholds) -> f64 {
    dominant_salience(emotions, thresholds).1
}

/// Like [`frame_salience`] but also reports which category attained the
/// maximum (the first one in category order on ties, `None` when zero).
pub fn dominant_salience(
    emotions: &EmotionVector,
    thresholds: &EmotionThresholds,
) -> (Option<Emotion>, f64) {
    let mut best = (None, 0.0);
    for e in Emotion::ALL {
        let s = salience_unchecked(emotions.get(e), thresholds.get(e));
        if s > best.1 {
            best = (Some(e), s);
        }
    }
    best
}

/// Map-based entry point that reports missing categories.
pub fn frame_salience_from_maps(
    emotions: &BTreeMap<Emotion, f64>,
    thresholds: &BTreeMap<Emotion, f64>,
) -> Result<f64, SalienceError> {
    let v = EmotionVector::from_map(emotions)?;
    let t = EmotionThresholds::from_map(thresholds)?;
    Ok(frame_salience(&v, &t))
}
