#![allow(dead_code)]

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::StandardNormal;
use selmem_core::encoders::{EncoderDescriptor, EncoderError, EncoderKind, MultimodalEncoder, TextEncoder};
use selmem_core::novelty::Novelty;
use selmem_core::{decide_memorable, Embedding, NewEpisode, NewScene, Store, Timestamp, UserId};

/// Encoder that ignores its input and returns one fixed vector.
pub struct Fixed {
    pub vector: Embedding,
    descriptor: EncoderDescriptor,
}

impl Fixed {
    pub fn new(vector: Embedding, kind: EncoderKind) -> Self {
        let descriptor = EncoderDescriptor { kind, dim: vector.dim(), identifier: "fixed".into() };
        Self { vector, descriptor }
    }
}

impl TextEncoder for Fixed {
    fn descriptor(&self) -> &EncoderDescriptor {
        &self.descriptor
    }
    fn encode_text(&self, texts: &[&str]) -> Result<Vec<Embedding>, EncoderError> {
        Ok(texts.iter().map(|_| self.vector.clone()).collect())
    }
}

impl MultimodalEncoder for Fixed {
    fn descriptor(&self) -> &EncoderDescriptor {
        &self.descriptor
    }
    fn encode_query(&self, _: &str) -> Result<Embedding, EncoderError> {
        Ok(self.vector.clone())
    }
    fn encode_image(&self, _: &str) -> Result<Embedding, EncoderError> {
        Ok(self.vector.clone())
    }
}

pub fn gaussian_vec<R: Rng>(rng: &mut R, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) as f32).collect()
}

pub fn gaussian<R: Rng>(rng: &mut R, dim: usize) -> Embedding {
    Embedding::new(gaussian_vec(rng, dim)).unwrap()
}

pub fn day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 10, 8).unwrap()
}

#[derive(Debug, Clone)]
pub struct OracleEpisode {
    pub t: u64,
    pub v: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct OracleScene {
    pub t: u64,
    pub img: Vec<f32>,
    pub cap: Option<Vec<f32>>,
}

/// A small random retrieval problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub dim_text: usize,
    pub dim_mm: usize,
    pub q_text: Vec<f32>,
    pub q_mm: Vec<f32>,
    pub episodes: Vec<OracleEpisode>,
    pub scenes: Vec<OracleScene>,
}

impl Instance {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let dim_text = rng.random_range(4..=64);
        let dim_mm = rng.random_range(4..=64);
        let (mut ne, mut ns) = (rng.random_range(0..=50), rng.random_range(0..=50));
        if ne + ns == 0 {
            ne = 1;
        }
        // occasionally singleton pools, to exercise the both-zero rule
        if rng.random_bool(0.1) {
            ne = 1;
            ns = 1;
        }
        let caption_rate: f64 = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.3..=1.0) };
        let tmax = rng.random_range(1..200u64);
        let mut episodes: Vec<OracleEpisode> = (0..ne)
            .map(|_| OracleEpisode { t: rng.random_range(0..tmax), v: gaussian_vec(rng, dim_text) })
            .collect();
        let mut scenes: Vec<OracleScene> = (0..ns)
            .map(|_| OracleScene {
                t: rng.random_range(0..tmax),
                img: gaussian_vec(rng, dim_mm),
                cap: rng.random_bool(caption_rate).then(|| gaussian_vec(rng, dim_text)),
            })
            .collect();
        // exact duplicates create score ties
        if episodes.len() > 2 && rng.random_bool(0.3) {
            episodes[1].v = episodes[0].v.clone();
        }
        if scenes.len() > 2 && rng.random_bool(0.3) {
            scenes[1].img = scenes[0].img.clone();
            scenes[1].cap = scenes[0].cap.clone();
        }
        Self {
            dim_text,
            dim_mm,
            q_text: gaussian_vec(rng, dim_text),
            q_mm: gaussian_vec(rng, dim_mm),
            episodes,
            scenes,
        }
    }

    /// Loads the instance into a fresh in-memory store under one user.
    pub fn store(&self) -> (Store, UserId, Vec<selmem_core::EpisodeId>, Vec<selmem_core::SceneId>) {
        let mut s = Store::in_memory(self.dim_text, self.dim_mm).unwrap();
        let u = s.create_user("Ann", None, day()).unwrap();
        let eids = self
            .episodes
            .iter()
            .map(|e| {
                s.put_episode(NewEpisode {
                    user_id: u.clone(),
                    timestamp: Timestamp(e.t),
                    transcript: "episode".into(),
                    text_embedding: Embedding::new(e.v.clone()).unwrap(),
                })
                .unwrap()
            })
            .collect();
        let sids = self
            .scenes
            .iter()
            .map(|sc| {
                s.put_scene(NewScene {
                    user_id: u.clone(),
                    timestamp: Timestamp(sc.t),
                    scene_embedding: Embedding::new(sc.img.clone()).unwrap(),
                    caption: if sc.cap.is_some() { "caption".into() } else { String::new() },
                    caption_embedding: sc.cap.clone().map(|c| Embedding::new(c).unwrap()),
                    image_ref: None,
                    capture: decide_memorable(0.0, Novelty::FirstScene, 0.3),
                })
                .unwrap()
            })
            .collect();
        (s, u, eids, sids)
    }

    pub fn encoders(&self) -> (Fixed, Fixed) {
        (
            Fixed::new(Embedding::new(self.q_text.clone()).unwrap(), EncoderKind::Text),
            Fixed::new(Embedding::new(self.q_mm.clone()).unwrap(), EncoderKind::Multimodal),
        )
    }
}

pub fn naive_cosine(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        let (x, y) = (a[i] as f64, b[i] as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

fn naive_z(xs: &[f64], eps: f64) -> Vec<f64> {
    let first = xs[0];
    if xs.iter().all(|x| *x == first) {
        return vec![0.0; xs.len()];
    }
    let n = xs.len() as f64;
    let mut mean = 0.0;
    for x in xs {
        mean += x;
    }
    mean /= n;
    let mut var = 0.0;
    for x in xs {
        var += (x - mean) * (x - mean);
    }
    let sd = (var / n).sqrt();
    xs.iter().map(|x| (x - mean) / (sd + eps)).collect()
}

fn naive_argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] > xs[best] {
            best = i;
        }
    }
    best
}

fn naive_nearest(ts: &[u64], target: u64) -> usize {
    let mut best = 0;
    for j in 1..ts.len() {
        let dj = ts[j].abs_diff(target);
        let db = ts[best].abs_diff(target);
        if dj < db || (dj == db && ts[j] < ts[best]) {
            best = j;
        }
    }
    best
}

/// Line-by-line reference of the hybrid retrieval procedure.
/// Returns (episode index, scene index) into the instance's pools.
pub fn oracle(inst: &Instance, alpha: f64, eps: f64) -> (Option<usize>, Option<usize>) {
    let s_ep: Vec<f64> = inst.episodes.iter().map(|e| naive_cosine(&inst.q_text, &e.v)).collect();
    let s_img: Vec<f64> = inst.scenes.iter().map(|s| naive_cosine(&inst.q_mm, &s.img)).collect();
    let s_desc: Vec<Option<f64>> = inst.scenes.iter().map(|s| s.cap.as_ref().map(|c| naive_cosine(&inst.q_text, c))).collect();
    let mut fill: Option<f64> = None;
    for d in s_desc.iter().flatten() {
        fill = Some(match fill {
            Some(f) if f <= *d => f,
            _ => *d,
        });
    }
    let fill = fill.unwrap_or(0.0);
    let s_scene: Vec<f64> = (0..inst.scenes.len())
        .map(|j| alpha * s_img[j] + (1.0 - alpha) * s_desc[j].unwrap_or(fill))
        .collect();

    let ep_ts: Vec<u64> = inst.episodes.iter().map(|e| e.t).collect();
    let sc_ts: Vec<u64> = inst.scenes.iter().map(|s| s.t).collect();
    match (s_ep.is_empty(), s_scene.is_empty()) {
        (true, true) => (None, None),
        (false, true) => (Some(naive_argmax(&s_ep)), None),
        (true, false) => (None, Some(naive_argmax(&s_scene))),
        (false, false) => {
            let z_ep = naive_z(&s_ep, eps);
            let z_sc = naive_z(&s_scene, eps);
            let i = naive_argmax(&z_ep);
            let j = naive_argmax(&z_sc);
            let episode_wins = z_ep[i] > z_sc[j] || (z_ep[i] == 0.0 && z_sc[j] == 0.0);
            if episode_wins {
                (Some(i), Some(naive_nearest(&sc_ts, ep_ts[i])))
            } else {
                (Some(naive_nearest(&ep_ts, sc_ts[j])), Some(j))
            }
        }
    }
}
