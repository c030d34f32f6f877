use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::capture::CaptureDecision;
use crate::vector::{Embedding, Timestamp};

/// `YYMMDD_NNNN`: creation date plus a per-day serial, e.g. `251008_0001`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct UserId(String);

impl UserId {
    pub fn from_date(date: NaiveDate, serial: u32) -> Self {
        Self(format!("{}_{serial:04}", date.format("%y%m%d")))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for UserId {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || StoreError::InvalidRecord(format!("user id {s:?} is not of the form YYMMDD_NNNN"));
        let (date, serial) = s.split_once('_').ok_or_else(bad)?;
        if date.len() != 6 || serial.len() < 4 || !serial.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        NaiveDate::parse_from_str(date, "%y%m%d").map_err(|_| bad())?;
        Ok(Self(s.to_string()))
    }
}

impl TryFrom<String> for UserId {
    type Error = StoreError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<UserId> for String {
    fn from(id: UserId) -> Self {
        id.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SceneId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EpisodeId(pub u64);

impl fmt::Display for SceneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scene-{}", self.0)
    }
}

impl fmt::Display for EpisodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "episode-{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: UserId,
    pub display_name: String,
    pub face_embedding: Option<Embedding>,
    pub profile_facts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneMemory {
    pub id: SceneId,
    pub user_id: UserId,
    pub timestamp: Timestamp,
    pub scene_embedding: Embedding,
    pub caption: String,
    pub caption_embedding: Option<Embedding>,
    pub image_ref: Option<String>,
    pub capture: CaptureDecision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMemory {
    pub id: EpisodeId,
    pub user_id: UserId,
    pub timestamp: Timestamp,
    pub transcript: String,
    pub text_embedding: Embedding,
}

/// A scene before the store assigns its id.
#[derive(Debug, Clone, PartialEq)]
pub struct NewScene {
    pub user_id: UserId,
    pub timestamp: Timestamp,
    pub scene_embedding: Embedding,
    pub caption: String,
    pub caption_embedding: Option<Embedding>,
    pub image_ref: Option<String>,
    pub capture: CaptureDecision,
}

impl NewScene {
    pub(crate) fn into_record(self, id: SceneId) -> SceneMemory {
        SceneMemory {
            id,
            user_id: self.user_id,
            timestamp: self.timestamp,
            scene_embedding: self.scene_embedding,
            caption: self.caption,
            caption_embedding: self.caption_embedding,
            image_ref: self.image_ref,
            capture: self.capture,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewEpisode {
    pub user_id: UserId,
    pub timestamp: Timestamp,
    pub transcript: String,
    pub text_embedding: Embedding,
}

impl NewEpisode {
    pub(crate) fn into_record(self, id: EpisodeId) -> EpisodeMemory {
        EpisodeMemory {
            id,
            user_id: self.user_id,
            timestamp: self.timestamp,
            transcript: self.transcript,
            text_embedding: self.text_embedding,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionCounts {
    pub users: usize,
    pub scenes: usize,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub format_version: u32,
    pub embedding_dim_text: usize,
    pub embedding_dim_mm: usize,
    #[serde(default)]
    pub embedding_dim_face: Option<usize>,
    pub counts: CollectionCounts,
    pub next_scene_id: u64,
    pub next_episode_id: u64,
    #[serde(default)]
    pub user_serials: BTreeMap<String, u32>,
}

impl StoreManifest {
    pub fn new(dim_text: usize, dim_mm: usize) -> Result<Self, StoreError> {
        if dim_text == 0 || dim_mm == 0 {
            return Err(StoreError::InvalidRecord("embedding dimensions must be positive".into()));
        }
        Ok(Self {
            format_version: super::FORMAT_VERSION,
            embedding_dim_text: dim_text,
            embedding_dim_mm: dim_mm,
            embedding_dim_face: None,
            counts: CollectionCounts::default(),
            next_scene_id: 1,
            next_episode_id: 1,
            user_serials: BTreeMap::new(),
        })
    }
}
