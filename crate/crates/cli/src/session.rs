//! Session files: one JSON frame per line, in timestamp order.
//!
//! ```text
//! {"t": 1000, "ref": "dog-park/1", "emotions": {"happy": 0.9}}
//! {"t": 2000, "ref": "dog-park/2", "complexity": 0.4}
//! ```
//!
//! `t` is in milliseconds. A frame without `emotions` had no detected face.
//! Blank lines and lines starting with `#` are skipped.

use std::collections::BTreeMap;
use std::path::Path;

use selmem_core::encoders::{FixtureDetector, FixtureRecord};
use selmem_core::{Emotion, Timestamp};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    t: u64,
    #[serde(rename = "ref")]
    image_ref: String,
    #[serde(default)]
    emotions: Option<BTreeMap<Emotion, f64>>,
    #[serde(default)]
    complexity: Option<f64>,
    #[serde(default)]
    concept: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionFrame {
    pub line: usize,
    pub timestamp: Timestamp,
    pub image_ref: String,
    pub complexity: Option<f64>,
}

#[derive(Debug)]
pub struct Session {
    pub frames: Vec<SessionFrame>,
    /// Emotion annotations keyed by frame reference.
    pub detector: FixtureDetector,
}

pub fn parse(text: &str, origin: &Path) -> Result<Session> {
    let err = |line: usize, msg: String| CliError::Input(format!("{}:{line}: {msg}", origin.display()));
    let mut frames = Vec::new();
    let mut records = Vec::new();
    let mut last: Option<u64> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let f: RawFrame = serde_json::from_str(trimmed).map_err(|e| err(line, e.to_string()))?;
        if f.image_ref.trim().is_empty() {
            return Err(err(line, "empty frame reference".into()));
        }
        if let Some(prev) = last {
            if f.t < prev {
                return Err(err(line, format!("timestamp {} is earlier than the previous frame ({prev})", f.t)));
            }
        }
        if let Some(c) = f.complexity {
            if !(0.0..=1.0).contains(&c) {
                return Err(err(line, format!("complexity {c} outside [0, 1]")));
            }
        }
        last = Some(f.t);
        // frames sharing a reference must agree on their annotation
        if let Some(prev) = records.iter().find(|r: &&FixtureRecord| r.image_ref == f.image_ref) {
            if prev.emotions != f.emotions {
                return Err(err(line, format!("conflicting annotations for {:?}", f.image_ref)));
            }
        } else {
            let rec = FixtureRecord { image_ref: f.image_ref.clone(), emotions: f.emotions, concept: f.concept };
            FixtureDetector::from_records([rec.clone()]).map_err(|e| err(line, e.to_string()))?;
            records.push(rec);
        }
        frames.push(SessionFrame {
            line,
            timestamp: Timestamp(f.t),
            image_ref: f.image_ref,
            complexity: f.complexity,
        });
    }
    let detector = FixtureDetector::from_records(records).map_err(|e| CliError::Input(e.to_string()))?;
    Ok(Session { frames, detector })
}

pub fn load(path: &Path) -> Result<Session> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse(&text, path)
}
