//! Emotion detection from planted annotations.
//!
//! Fixture files hold one JSON object per line:
//!
//! ```text
//! {"ref": "dog-park/1", "emotions": {"happy": 0.9}, "concept": "dog-park"}
//! ```
//!
//! Categories missing from `emotions` read as 0; a record without
//! `emotions` means no face was detected (all zeros).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmotionDetector, EncoderError};
use crate::salience::{Emotion, EmotionVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    #[serde(rename = "ref")]
    pub image_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotions: Option<BTreeMap<Emotion, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct FixtureDetector {
    records: HashMap<String, EmotionVector>,
}

impl FixtureDetector {
    pub fn from_records<I: IntoIterator<Item = FixtureRecord>>(records: I) -> Result<Self, EncoderError> {
        let mut map = HashMap::new();
        for r in records {
            let v = match &r.emotions {
                Some(m) => EmotionVector::from_partial(m)
                    .map_err(|e| EncoderError::Detector(format!("{}: {e}", r.image_ref)))?,
                None => EmotionVector::zeros(),
            };
            map.insert(r.image_ref, v);
        }
        Ok(Self { records: map })
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, EncoderError> {
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: FixtureRecord = serde_json::from_str(line)
                .map_err(|e| EncoderError::Detector(format!("fixture line {}: {e}", n + 1)))?;
            records.push(r);
        }
        Self::from_records(records)
    }

    pub fn load(path: &Path) -> Result<Self, EncoderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EncoderError::Detector(format!("{}: {e}", path.display())))?;
        Self::parse_jsonl(&text)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl EmotionDetector for FixtureDetector {
    fn detect(&self, frame_ref: &str) -> Result<EmotionVector, EncoderError> {
        self.records
            .get(frame_ref)
            .copied()
            .ok_or_else(|| EncoderError::Detector(format!("no annotation for {frame_ref:?}")))
    }
}
