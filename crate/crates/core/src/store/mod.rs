//! Per-user multimodal memory database.
//!
//! A store holds user profiles plus two record collections per user: scenes
//! (image embedding, caption, caption embedding) and episodes (conversation
//! transcript and its embedding). A store is either purely in memory or
//! bound to a directory, in which case every `put_*` is appended to disk
//! before it returns.
//!
//! # On-disk layout (format version 1)
//!
//! ```text
//! <dir>/manifest.json       format version, embedding dims, counts, id counters
//! <dir>/users.jsonl         one profile per line (later lines replace earlier ones)
//! <dir>/scenes.jsonl        one scene record per line
//! <dir>/episodes.jsonl      one episode record per line
//! <dir>/users.vec           little-endian f32 blocks referenced as {offset, len}
//! <dir>/scenes.vec
//! <dir>/episodes.vec
//! <dir>/images/<sha256>     optional content-addressed image bytes
//! ```
//!
//! Offsets and lengths count `f32` values, not bytes.
//!
//! The store follows a reader/writer contract: queries take `&self`,
//! mutations take `&mut self`. Share it across threads behind a `RwLock`.

mod disk;
mod types;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::vector::{cosine_unchecked, Embedding};
pub use disk::FORMAT_VERSION;
pub use types::*;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{field} dimension mismatch: store expects {expected}, got {actual}")]
    Dimension {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("unknown record {0}")]
    UnknownRecord(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("unsupported store format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
    #[error("corrupt store: {0}")]
    Corrupt(String),
    #[error("storage I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl StoreError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StoreError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Which vector of a scene record a nearest-neighbour scan compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneField {
    Image,
    Caption,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<Id> {
    pub id: Id,
    pub timestamp: crate::vector::Timestamp,
    pub similarity: f64,
}

#[derive(Debug, Default)]
struct UserRecords {
    scenes: Vec<SceneId>,
    episodes: Vec<EpisodeId>,
}

#[derive(Debug)]
pub struct Store {
    manifest: StoreManifest,
    users: BTreeMap<UserId, UserProfile>,
    scenes: BTreeMap<SceneId, SceneMemory>,
    episodes: BTreeMap<EpisodeId, EpisodeMemory>,
    by_user: HashMap<UserId, UserRecords>,
    disk: Option<disk::DiskLog>,
}

impl Store {
    /// An empty store that lives only in memory.
    pub fn in_memory(dim_text: usize, dim_mm: usize) -> Result<Self, StoreError> {
        Ok(Self::from_manifest(StoreManifest::new(dim_text, dim_mm)?))
    }

    fn from_manifest(manifest: StoreManifest) -> Self {
        Self {
            manifest,
            users: BTreeMap::new(),
            scenes: BTreeMap::new(),
            episodes: BTreeMap::new(),
            by_user: HashMap::new(),
            disk: None,
        }
    }

    /// Creates a new, empty store bound to `dir`. Fails if `dir` already
    /// holds a manifest.
    pub fn create(dir: impl AsRef<Path>, dim_text: usize, dim_mm: usize) -> Result<Self, StoreError> {
        let mut store = Self::in_memory(dim_text, dim_mm)?;
        store.disk = Some(disk::DiskLog::create(dir.as_ref(), &store.manifest)?);
        Ok(store)
    }

    /// Opens an existing store directory for reading and appending.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let mut store = Self::load(dir.as_ref())?;
        store.disk = Some(disk::DiskLog::attach(dir.as_ref())?);
        Ok(store)
    }

    /// Opens `dir` if it holds a store, otherwise creates one there.
    pub fn open_or_create(dir: impl AsRef<Path>, dim_text: usize, dim_mm: usize) -> Result<Self, StoreError> {
        let dir = dir.as_ref();
        if dir.join(disk::MANIFEST).exists() {
            let store = Self::open(dir)?;
            let m = store.manifest();
            if m.embedding_dim_text != dim_text {
                return Err(StoreError::Dimension { field: "text embedding", expected: m.embedding_dim_text, actual: dim_text });
            }
            if m.embedding_dim_mm != dim_mm {
                return Err(StoreError::Dimension { field: "multimodal embedding", expected: m.embedding_dim_mm, actual: dim_mm });
            }
            Ok(store)
        } else {
            Self::create(dir, dim_text, dim_mm)
        }
    }

    /// Reads a store snapshot into memory. The result is not bound to `dir`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let snap = disk::read_snapshot(dir.as_ref())?;
        let mut store = Self::from_manifest(snap.manifest);
        for p in snap.users {
            store.users.insert(p.user_id.clone(), p);
        }
        for s in snap.scenes {
            store.index_scene(s);
        }
        for e in snap.episodes {
            store.index_episode(e);
        }
        store.check_counts()?;
        Ok(store)
    }

    /// Writes a complete snapshot of this store to `dir`, replacing any
    /// store files already there.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), StoreError> {
        let manifest = self.manifest_with_counts();
        disk::write_snapshot(
            dir.as_ref(),
            &manifest,
            self.users.values(),
            self.scenes.values(),
            self.episodes.values(),
        )?;
        if let Some(d) = &self.disk {
            if d.root() != dir.as_ref() {
                disk::copy_images(d.root(), dir.as_ref(), self.scenes.values())?;
            }
        }
        Ok(())
    }

    pub fn path(&self) -> Option<&Path> {
        self.disk.as_ref().map(|d| d.root())
    }

    pub fn manifest(&self) -> StoreManifest {
        self.manifest_with_counts()
    }

    fn manifest_with_counts(&self) -> StoreManifest {
        let mut m = self.manifest.clone();
        m.counts = CollectionCounts {
            users: self.users.len(),
            scenes: self.scenes.len(),
            episodes: self.episodes.len(),
        };
        m
    }

    fn check_counts(&self) -> Result<(), StoreError> {
        let expect = &self.manifest.counts;
        let got = self.manifest_with_counts().counts;
        if *expect != got {
            return Err(StoreError::Corrupt(format!(
                "manifest counts {expect:?} disagree with record logs {got:?}"
            )));
        }
        Ok(())
    }

    fn sync_manifest(&mut self) -> Result<(), StoreError> {
        self.manifest = self.manifest_with_counts();
        if let Some(d) = &self.disk {
            d.write_manifest(&self.manifest)?;
        }
        Ok(())
    }

    // ---- users ---------------------------------------------------------

    pub fn users(&self) -> impl Iterator<Item = &UserProfile> {
        self.users.values()
    }

    pub fn user(&self, id: &UserId) -> Option<&UserProfile> {
        self.users.get(id)
    }

    pub fn contains_user(&self, id: &UserId) -> bool {
        self.users.contains_key(id)
    }

    /// Allocates the next unused `YYMMDD_NNNN` id for `date`.
    pub fn allocate_user_id(&mut self, date: NaiveDate) -> UserId {
        let key = date.format("%y%m%d").to_string();
        let serial = self.manifest.user_serials.entry(key).or_insert(0);
        *serial += 1;
        UserId::from_date(date, *serial)
    }

    /// Inserts or replaces a profile.
    pub fn put_user(&mut self, profile: UserProfile) -> Result<UserId, StoreError> {
        if let Some(face) = &profile.face_embedding {
            match self.manifest.embedding_dim_face {
                Some(d) if d != face.dim() => {
                    return Err(StoreError::Dimension { field: "face embedding", expected: d, actual: face.dim() })
                }
                _ => self.manifest.embedding_dim_face = Some(face.dim()),
            }
        }
        if self.users.contains_key(&profile.user_id) && profile.display_name.is_empty() {
            if let Some(old) = self.users.get(&profile.user_id) {
                if !old.display_name.is_empty() {
                    return Err(StoreError::InvalidRecord("display name cannot be cleared once set".into()));
                }
            }
        }
        if let Some(d) = &mut self.disk {
            d.append_user(&profile)?;
        }
        let id = profile.user_id.clone();
        self.by_user.entry(id.clone()).or_default();
        self.users.insert(id.clone(), profile);
        self.sync_manifest()?;
        Ok(id)
    }

    /// Creates a profile with a freshly allocated id.
    pub fn create_user(
        &mut self,
        display_name: &str,
        face: Option<Embedding>,
        date: NaiveDate,
    ) -> Result<UserId, StoreError> {
        let id = self.allocate_user_id(date);
        self.put_user(UserProfile {
            user_id: id,
            display_name: display_name.trim().to_string(),
            face_embedding: face,
            profile_facts: BTreeMap::new(),
        })
    }

    // ---- scenes and episodes --------------------------------------------

    pub fn put_scene(&mut self, scene: NewScene) -> Result<SceneId, StoreError> {
        self.require_user(&scene.user_id)?;
        self.check_dim("scene embedding", self.manifest.embedding_dim_mm, scene.scene_embedding.dim())?;
        match (&scene.caption_embedding, scene.caption.is_empty()) {
            (Some(e), false) => self.check_dim("caption embedding", self.manifest.embedding_dim_text, e.dim())?,
            (None, true) => {}
            _ => {
                return Err(StoreError::InvalidRecord(
                    "caption embedding must be present exactly when the caption is non-empty".into(),
                ))
            }
        }
        if scene.capture.memorable != !scene.capture.triggered_by.is_empty() {
            return Err(StoreError::InvalidRecord("capture decision is inconsistent".into()));
        }
        let id = SceneId(self.manifest.next_scene_id);
        let record = scene.into_record(id);
        if let Some(d) = &mut self.disk {
            d.append_scene(&record)?;
        }
        self.manifest.next_scene_id += 1;
        self.index_scene(record);
        self.sync_manifest()?;
        Ok(id)
    }

    pub fn put_episode(&mut self, episode: NewEpisode) -> Result<EpisodeId, StoreError> {
        self.require_user(&episode.user_id)?;
        self.check_dim("text embedding", self.manifest.embedding_dim_text, episode.text_embedding.dim())?;
        if episode.transcript.trim().is_empty() {
            return Err(StoreError::InvalidRecord("episode transcript is empty".into()));
        }
        let id = EpisodeId(self.manifest.next_episode_id);
        let record = episode.into_record(id);
        if let Some(d) = &mut self.disk {
            d.append_episode(&record)?;
        }
        self.manifest.next_episode_id += 1;
        self.index_episode(record);
        self.sync_manifest()?;
        Ok(id)
    }

    /// Stores raw image bytes under their content address and returns the
    /// reference. In-memory stores only compute the reference.
    pub fn put_image(&mut self, bytes: &[u8]) -> Result<String, StoreError> {
        let hex: String = Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect();
        let image_ref = format!("sha256:{hex}");
        if let Some(d) = &self.disk {
            d.write_image(&hex, bytes)?;
        }
        Ok(image_ref)
    }

    pub fn scene(&self, id: SceneId) -> Option<&SceneMemory> {
        self.scenes.get(&id)
    }

    pub fn episode(&self, id: EpisodeId) -> Option<&EpisodeMemory> {
        self.episodes.get(&id)
    }

    /// A user's scenes in insertion order.
    pub fn scenes_of(&self, user: &UserId) -> impl Iterator<Item = &SceneMemory> {
        self.by_user
            .get(user)
            .into_iter()
            .flat_map(|r| r.scenes.iter())
            .filter_map(|id| self.scenes.get(id))
    }

    /// A user's episodes in insertion order.
    pub fn episodes_of(&self, user: &UserId) -> impl Iterator<Item = &EpisodeMemory> {
        self.by_user
            .get(user)
            .into_iter()
            .flat_map(|r| r.episodes.iter())
            .filter_map(|id| self.episodes.get(id))
    }

    pub fn scene_count(&self) -> usize {
        self.scenes.len()
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }

    /// Exact scan over a user's scenes. Records lacking a caption embedding
    /// are skipped when scanning captions.
    pub fn nearest_scenes(
        &self,
        user: &UserId,
        query: &Embedding,
        field: SceneField,
        limit: usize,
    ) -> Result<Vec<Neighbor<SceneId>>, StoreError> {
        let (name, dim) = match field {
            SceneField::Image => ("scene embedding", self.manifest.embedding_dim_mm),
            SceneField::Caption => ("caption embedding", self.manifest.embedding_dim_text),
        };
        self.check_dim(name, dim, query.dim())?;
        let hits = self.scenes_of(user).filter_map(|s| {
            let v = match field {
                SceneField::Image => Some(&s.scene_embedding),
                SceneField::Caption => s.caption_embedding.as_ref(),
            }?;
            Some(Neighbor { id: s.id, timestamp: s.timestamp, similarity: cosine_unchecked(query, v) })
        });
        Ok(top_k(hits.collect(), limit))
    }

    pub fn nearest_episodes(
        &self,
        user: &UserId,
        query: &Embedding,
        limit: usize,
    ) -> Result<Vec<Neighbor<EpisodeId>>, StoreError> {
        self.check_dim("text embedding", self.manifest.embedding_dim_text, query.dim())?;
        let hits = self.episodes_of(user).map(|e| Neighbor {
            id: e.id,
            timestamp: e.timestamp,
            similarity: cosine_unchecked(query, &e.text_embedding),
        });
        Ok(top_k(hits.collect(), limit))
    }

    /// Permanently removes a user: profile, scenes, episodes and any image
    /// files only they reference. Returns the number of purged records
    /// (profile included). A directory-backed store is compacted on disk.
    pub fn delete_user(&mut self, user: &UserId) -> Result<usize, StoreError> {
        self.require_user(user)?;
        self.users.remove(user);
        let recs = self.by_user.remove(user).unwrap_or_default();
        let mut refs = BTreeSet::new();
        for id in &recs.scenes {
            if let Some(s) = self.scenes.remove(id) {
                refs.extend(s.image_ref);
            }
        }
        for id in &recs.episodes {
            self.episodes.remove(id);
        }
        let still_used: BTreeSet<&String> =
            self.scenes.values().filter_map(|s| s.image_ref.as_ref()).collect();
        self.manifest = self.manifest_with_counts();
        if let Some(d) = &self.disk {
            let root = d.root().to_path_buf();
            self.save(&root)?;
            for r in refs.iter().filter(|r| !still_used.contains(r)) {
                disk::remove_image(&root, r)?;
            }
            self.disk = Some(disk::DiskLog::attach(&root)?);
        }
        Ok(1 + recs.scenes.len() + recs.episodes.len())
    }

    fn index_scene(&mut self, s: SceneMemory) {
        self.by_user.entry(s.user_id.clone()).or_default().scenes.push(s.id);
        self.scenes.insert(s.id, s);
    }

    fn index_episode(&mut self, e: EpisodeMemory) {
        self.by_user.entry(e.user_id.clone()).or_default().episodes.push(e.id);
        self.episodes.insert(e.id, e);
    }

    fn require_user(&self, user: &UserId) -> Result<(), StoreError> {
        if self.users.contains_key(user) {
            Ok(())
        } else {
            Err(StoreError::UnknownUser(user.clone()))
        }
    }

    fn check_dim(&self, field: &'static str, expected: usize, actual: usize) -> Result<(), StoreError> {
        if expected != actual {
            return Err(StoreError::Dimension { field, expected, actual });
        }
        Ok(())
    }
}

/// Sorts by descending similarity, then ascending timestamp, then ascending
/// id, and keeps the first `limit`.
fn top_k<Id: Ord + Copy>(mut hits: Vec<Neighbor<Id>>, limit: usize) -> Vec<Neighbor<Id>> {
    hits.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then(a.timestamp.cmp(&b.timestamp))
            .then(a.id.cmp(&b.id))
    });
    hits.truncate(limit);
    hits
}
