use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::types::*;
use super::StoreError;
use crate::capture::CaptureDecision;
use crate::vector::{Embedding, Timestamp};

pub const FORMAT_VERSION: u32 = 1;

pub(super) const MANIFEST: &str = "manifest.json";
const IMAGES: &str = "images";

#[derive(Debug, Clone, Copy)]
enum Collection {
    Users,
    Scenes,
    Episodes,
}

impl Collection {
    fn log(self) -> &'static str {
        match self {
            Collection::Users => "users.jsonl",
            Collection::Scenes => "scenes.jsonl",
            Collection::Episodes => "episodes.jsonl",
        }
    }

    fn vec(self) -> &'static str {
        match self {
            Collection::Users => "users.vec",
            Collection::Scenes => "scenes.vec",
            Collection::Episodes => "episodes.vec",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct VecRef {
    offset: u64,
    len: u64,
}

#[derive(Serialize, Deserialize)]
struct UserLine {
    user_id: UserId,
    display_name: String,
    face: Option<VecRef>,
    #[serde(default)]
    profile_facts: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct SceneLine {
    id: SceneId,
    user_id: UserId,
    timestamp: Timestamp,
    scene_vec: VecRef,
    caption: String,
    caption_vec: Option<VecRef>,
    image_ref: Option<String>,
    capture: CaptureDecision,
}

#[derive(Serialize, Deserialize)]
struct EpisodeLine {
    id: EpisodeId,
    user_id: UserId,
    timestamp: Timestamp,
    transcript: String,
    text_vec: VecRef,
}

/// Accumulates one collection's log lines and vector block in memory.
#[derive(Default)]
struct Buffers {
    log: Vec<u8>,
    vecs: Vec<u8>,
    base: u64,
}

impl Buffers {
    fn starting_at(base: u64) -> Self {
        Self { base, ..Self::default() }
    }

    fn push_vec(&mut self, e: &Embedding) -> VecRef {
        let offset = self.base + (self.vecs.len() / 4) as u64;
        for v in e.values() {
            self.vecs.extend_from_slice(&v.to_le_bytes());
        }
        VecRef { offset, len: e.dim() as u64 }
    }

    fn push_line<T: Serialize>(&mut self, line: &T) {
        serde_json::to_writer(&mut self.log, line).expect("record serialization cannot fail");
        self.log.push(b'\n');
    }
}

fn user_line(p: &UserProfile, b: &mut Buffers) -> UserLine {
    UserLine {
        user_id: p.user_id.clone(),
        display_name: p.display_name.clone(),
        face: p.face_embedding.as_ref().map(|f| b.push_vec(f)),
        profile_facts: p.profile_facts.clone(),
    }
}

fn scene_line(s: &SceneMemory, b: &mut Buffers) -> SceneLine {
    SceneLine {
        id: s.id,
        user_id: s.user_id.clone(),
        timestamp: s.timestamp,
        scene_vec: b.push_vec(&s.scene_embedding),
        caption: s.caption.clone(),
        caption_vec: s.caption_embedding.as_ref().map(|c| b.push_vec(c)),
        image_ref: s.image_ref.clone(),
        capture: s.capture.clone(),
    }
}

fn episode_line(e: &EpisodeMemory, b: &mut Buffers) -> EpisodeLine {
    EpisodeLine {
        id: e.id,
        user_id: e.user_id.clone(),
        timestamp: e.timestamp,
        transcript: e.transcript.clone(),
        text_vec: b.push_vec(&e.text_embedding),
    }
}

/// Append handle for a directory-backed store.
#[derive(Debug)]
pub(super) struct DiskLog {
    root: PathBuf,
    vec_lens: [u64; 3],
}

impl DiskLog {
    pub(super) fn create(root: &Path, manifest: &StoreManifest) -> Result<Self, StoreError> {
        if root.join(MANIFEST).exists() {
            return Err(StoreError::InvalidRecord(format!(
                "{} already contains a store",
                root.display()
            )));
        }
        fs::create_dir_all(root).map_err(|e| StoreError::io(root, e))?;
        for c in [Collection::Users, Collection::Scenes, Collection::Episodes] {
            for name in [c.log(), c.vec()] {
                let p = root.join(name);
                File::create(&p).map_err(|e| StoreError::io(&p, e))?;
            }
        }
        let log = Self { root: root.to_path_buf(), vec_lens: [0; 3] };
        log.write_manifest(manifest)?;
        Ok(log)
    }

    pub(super) fn attach(root: &Path) -> Result<Self, StoreError> {
        let mut vec_lens = [0; 3];
        for (i, c) in [Collection::Users, Collection::Scenes, Collection::Episodes].into_iter().enumerate() {
            let p = root.join(c.vec());
            let len = fs::metadata(&p).map_err(|e| StoreError::io(&p, e))?.len();
            vec_lens[i] = len / 4;
        }
        Ok(Self { root: root.to_path_buf(), vec_lens })
    }

    pub(super) fn root(&self) -> &Path {
        &self.root
    }

    pub(super) fn write_manifest(&self, manifest: &StoreManifest) -> Result<(), StoreError> {
        let body = serde_json::to_vec_pretty(manifest).expect("manifest serialization cannot fail");
        write_replace(&self.root.join(MANIFEST), &body)
    }

    fn append(&mut self, c: Collection, b: Buffers) -> Result<(), StoreError> {
        // Vectors first: a log line must never reference bytes not yet written.
        append_bytes(&self.root.join(c.vec()), &b.vecs)?;
        append_bytes(&self.root.join(c.log()), &b.log)?;
        self.vec_lens[c as usize] += (b.vecs.len() / 4) as u64;
        Ok(())
    }

    pub(super) fn append_user(&mut self, p: &UserProfile) -> Result<(), StoreError> {
        let mut b = Buffers::starting_at(self.vec_lens[Collection::Users as usize]);
        let line = user_line(p, &mut b);
        b.push_line(&line);
        self.append(Collection::Users, b)
    }

    pub(super) fn append_scene(&mut self, s: &SceneMemory) -> Result<(), StoreError> {
        let mut b = Buffers::starting_at(self.vec_lens[Collection::Scenes as usize]);
        let line = scene_line(s, &mut b);
        b.push_line(&line);
        self.append(Collection::Scenes, b)
    }

    pub(super) fn append_episode(&mut self, e: &EpisodeMemory) -> Result<(), StoreError> {
        let mut b = Buffers::starting_at(self.vec_lens[Collection::Episodes as usize]);
        let line = episode_line(e, &mut b);
        b.push_line(&line);
        self.append(Collection::Episodes, b)
    }

    pub(super) fn write_image(&self, hex: &str, bytes: &[u8]) -> Result<(), StoreError> {
        let dir = self.root.join(IMAGES);
        fs::create_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
        let p = dir.join(hex);
        if !p.exists() {
            write_replace(&p, bytes)?;
        }
        Ok(())
    }
}

fn append_bytes(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if bytes.is_empty() {
        return Ok(());
    }
    let mut f = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| StoreError::io(path, e))?;
    f.write_all(bytes).map_err(|e| StoreError::io(path, e))?;
    f.flush().map_err(|e| StoreError::io(path, e))
}

fn write_replace(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    fs::write(&tmp, bytes).map_err(|e| StoreError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| StoreError::io(path, e))
}

pub(super) fn write_snapshot<'a>(
    root: &Path,
    manifest: &StoreManifest,
    users: impl Iterator<Item = &'a UserProfile>,
    scenes: impl Iterator<Item = &'a SceneMemory>,
    episodes: impl Iterator<Item = &'a EpisodeMemory>,
) -> Result<(), StoreError> {
    fs::create_dir_all(root).map_err(|e| StoreError::io(root, e))?;
    let mut ub = Buffers::default();
    for u in users {
        let l = user_line(u, &mut ub);
        ub.push_line(&l);
    }
    let mut sb = Buffers::default();
    for s in scenes {
        let l = scene_line(s, &mut sb);
        sb.push_line(&l);
    }
    let mut eb = Buffers::default();
    for e in episodes {
        let l = episode_line(e, &mut eb);
        eb.push_line(&l);
    }
    for (c, b) in [(Collection::Users, ub), (Collection::Scenes, sb), (Collection::Episodes, eb)] {
        write_replace(&root.join(c.vec()), &b.vecs)?;
        write_replace(&root.join(c.log()), &b.log)?;
    }
    let body = serde_json::to_vec_pretty(manifest).expect("manifest serialization cannot fail");
    write_replace(&root.join(MANIFEST), &body)
}

pub(super) struct Snapshot {
    pub manifest: StoreManifest,
    pub users: Vec<UserProfile>,
    pub scenes: Vec<SceneMemory>,
    pub episodes: Vec<EpisodeMemory>,
}

struct VecFile {
    name: &'static str,
    data: Vec<f32>,
}

impl VecFile {
    fn read(root: &Path, c: Collection) -> Result<Self, StoreError> {
        let p = root.join(c.vec());
        let bytes = fs::read(&p).map_err(|e| StoreError::io(&p, e))?;
        if bytes.len() % 4 != 0 {
            return Err(StoreError::Corrupt(format!(
                "{} has a length of {} bytes, not a whole number of f32 values",
                c.vec(),
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|ch| f32::from_le_bytes([ch[0], ch[1], ch[2], ch[3]]))
            .collect();
        Ok(Self { name: c.vec(), data })
    }

    fn get(&self, r: VecRef) -> Result<Embedding, StoreError> {
        let start = r.offset as usize;
        let end = start
            .checked_add(r.len as usize)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| {
                StoreError::Corrupt(format!(
                    "vector block [{}, +{}) lies outside {} ({} values)",
                    r.offset,
                    r.len,
                    self.name,
                    self.data.len()
                ))
            })?;
        Embedding::new(self.data[start..end].to_vec())
            .map_err(|e| StoreError::Corrupt(format!("invalid vector in {}: {e}", self.name)))
    }
}

fn read_lines<T: for<'de> Deserialize<'de>>(root: &Path, c: Collection) -> Result<Vec<T>, StoreError> {
    let p = root.join(c.log());
    let f = File::open(&p).map_err(|e| StoreError::io(&p, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| StoreError::io(&p, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| StoreError::Corrupt(format!("{} line {}: {e}", c.log(), n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub(super) fn read_snapshot(root: &Path) -> Result<Snapshot, StoreError> {
    let mp = root.join(MANIFEST);
    let raw = fs::read(&mp).map_err(|e| StoreError::io(&mp, e))?;
    let version: serde_json::Value =
        serde_json::from_slice(&raw).map_err(|e| StoreError::Corrupt(format!("{MANIFEST}: {e}")))?;
    let found = version.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != FORMAT_VERSION {
        return Err(StoreError::FormatVersion { found, expected: FORMAT_VERSION });
    }
    let manifest: StoreManifest =
        serde_json::from_slice(&raw).map_err(|e| StoreError::Corrupt(format!("{MANIFEST}: {e}")))?;

    let uv = VecFile::read(root, Collection::Users)?;
    let mut users: BTreeMap<UserId, UserProfile> = BTreeMap::new();
    for l in read_lines::<UserLine>(root, Collection::Users)? {
        let face = l.face.map(|r| uv.get(r)).transpose()?;
        users.insert(
            l.user_id.clone(),
            UserProfile {
                user_id: l.user_id,
                display_name: l.display_name,
                face_embedding: face,
                profile_facts: l.profile_facts,
            },
        );
    }

    let sv = VecFile::read(root, Collection::Scenes)?;
    let mut scenes = Vec::new();
    for l in read_lines::<SceneLine>(root, Collection::Scenes)? {
        check_dim("scene", l.scene_vec.len, manifest.embedding_dim_mm)?;
        if let Some(c) = l.caption_vec {
            check_dim("caption", c.len, manifest.embedding_dim_text)?;
        }
        scenes.push(SceneMemory {
            id: l.id,
            user_id: l.user_id,
            timestamp: l.timestamp,
            scene_embedding: sv.get(l.scene_vec)?,
            caption: l.caption,
            caption_embedding: l.caption_vec.map(|r| sv.get(r)).transpose()?,
            image_ref: l.image_ref,
            capture: l.capture,
        });
    }

    let ev = VecFile::read(root, Collection::Episodes)?;
    let mut episodes = Vec::new();
    for l in read_lines::<EpisodeLine>(root, Collection::Episodes)? {
        check_dim("episode", l.text_vec.len, manifest.embedding_dim_text)?;
        episodes.push(EpisodeMemory {
            id: l.id,
            user_id: l.user_id,
            timestamp: l.timestamp,
            transcript: l.transcript,
            text_embedding: ev.get(l.text_vec)?,
        });
    }

    for (kind, owner) in scenes
        .iter()
        .map(|s| ("scene", &s.user_id))
        .chain(episodes.iter().map(|e| ("episode", &e.user_id)))
    {
        if !users.contains_key(owner) {
            return Err(StoreError::Corrupt(format!("{kind} record owned by missing user {owner}")));
        }
    }

    Ok(Snapshot {
        manifest,
        users: users.into_values().collect(),
        scenes,
        episodes,
    })
}

fn check_dim(kind: &str, len: u64, expected: usize) -> Result<(), StoreError> {
    if len as usize != expected {
        return Err(StoreError::Corrupt(format!(
            "{kind} vector has {len} values, manifest says {expected}"
        )));
    }
    Ok(())
}

fn image_path(root: &Path, image_ref: &str) -> Option<PathBuf> {
    let hex = image_ref.strip_prefix("sha256:")?;
    if hex.len() != 64 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    Some(root.join(IMAGES).join(hex))
}

pub(super) fn remove_image(root: &Path, image_ref: &str) -> Result<(), StoreError> {
    if let Some(p) = image_path(root, image_ref) {
        if p.exists() {
            fs::remove_file(&p).map_err(|e| StoreError::io(&p, e))?;
        }
    }
    Ok(())
}

pub(super) fn copy_images<'a>(
    from: &Path,
    to: &Path,
    scenes: impl Iterator<Item = &'a SceneMemory>,
) -> Result<(), StoreError> {
    for r in scenes.filter_map(|s| s.image_ref.as_deref()) {
        if let (Some(src), Some(dst)) = (image_path(from, r), image_path(to, r)) {
            if src.exists() && !dst.exists() {
                let dir = to.join(IMAGES);
                fs::create_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
                fs::copy(&src, &dst).map_err(|e| StoreError::io(&dst, e))?;
            }
        }
    }
    Ok(())
}
