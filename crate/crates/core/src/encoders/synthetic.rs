//! A deterministic synthetic multimodal world.
//!
//! Every concept (a hyphenated label such as `dog-park`) owns one random
//! anchor direction in the text space and an independent one in the
//! multimodal space. Text embeds to the sum of the anchors of the concept
//! labels it mentions plus a `text_noise`-scaled contribution from its other
//! words. An image reference `<label>/<variant>` embeds to its concept's
//! multimodal anchor plus `image_noise`-scaled per-image noise. The image and
//! caption channels therefore carry independent noisy views of the same
//! concept.
//!
//! All vectors are derived from SHA-256 of `(seed, domain, key)` feeding a
//! ChaCha stream, so outputs are bit-identical across runs and platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    tokenize, EncoderDescriptor, EncoderError, EncoderKind, MultimodalEncoder, SceneDescriber,
    TextEncoder,
};
use crate::vector::{cosine_unchecked, Embedding};

const PLACES: [&str; 20] = [
    "dog", "cat", "beach", "garden", "kitchen", "market", "museum", "concert", "birthday",
    "picnic", "harbor", "library", "forest", "station", "cafe", "school", "river", "bridge",
    "stadium", "festival",
];

const EVENTS: [&str; 20] = [
    "park", "party", "walk", "visit", "trip", "dinner", "game", "show", "lesson", "tour",
    "morning", "night", "reunion", "fair", "hike", "ride", "class", "stall", "meeting", "parade",
];

const MODIFIERS: [&str; 48] = [
    "bright", "dim", "crowded", "quiet", "sunny", "rainy", "indoor", "outdoor", "colorful",
    "busy", "calm", "warm", "cold", "noisy", "small", "large", "old", "new", "red", "blue",
    "green", "yellow", "wooden", "stone", "glass", "empty", "cozy", "windy", "foggy", "snowy",
    "festive", "formal", "casual", "early", "late", "long", "short", "tall", "round", "narrow",
    "open", "shaded", "golden", "silver", "soft", "loud", "tidy", "messy",
];

fn digest_seed(seed: u64, domain: &str, key: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((domain.len() as u64).to_le_bytes());
    h.update(domain.as_bytes());
    h.update(key.as_bytes());
    let out = h.finalize();
    let mut s = [0u8; 32];
    s.copy_from_slice(&out);
    s
}

fn gaussian(seed: u64, domain: &str, key: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::from_seed(digest_seed(seed, domain, key));
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (y, xi) in acc.iter_mut().zip(x) {
        *y += a * xi;
    }
}

fn pick(seed: u64, domain: &str, key: &str, n: usize) -> usize {
    let d = digest_seed(seed, domain, key);
    (u64::from_le_bytes(d[..8].try_into().unwrap()) % n as u64) as usize
}

pub(crate) fn is_concept(token: &str) -> bool {
    token.contains('-')
}

/// Label of the `i`-th concept: unique for every `i`.
pub fn concept_label(i: usize) -> String {
    let base = format!(
        "{}-{}",
        PLACES[i % PLACES.len()],
        EVENTS[(i / PLACES.len()) % EVENTS.len()]
    );
    match i / (PLACES.len() * EVENTS.len()) {
        0 => base,
        round => format!("{base}-{round}"),
    }
}

/// Concept part of an image reference `<label>/<variant>`.
pub fn concept_of_ref(image_ref: &str) -> Result<&str, EncoderError> {
    match image_ref.split_once('/') {
        Some((c, v)) if is_concept(c) && !v.is_empty() && c == c.trim() => Ok(c),
        _ => Err(EncoderError::UnknownRef(image_ref.to_string())),
    }
}

/// Shared text-to-space mapping for both encoders.
fn embed_text(seed: u64, space: &str, dim: usize, noise: f64, text: &str) -> Result<Embedding, EncoderError> {
    let tokens = tokenize(text);
    let mut anchors = vec![0.0; dim];
    let mut words = vec![0.0; dim];
    let (mut n_concepts, mut n_words) = (0, 0);
    for t in &tokens {
        if is_concept(t) {
            axpy(&mut anchors, 1.0, &gaussian(seed, &format!("{space}/anchor"), t, dim));
            n_concepts += 1;
        } else {
            axpy(&mut words, 1.0, &gaussian(seed, &format!("{space}/word"), t, dim));
            n_words += 1;
        }
    }
    let v = match (n_concepts, n_words) {
        (0, 0) => gaussian(seed, &format!("{space}/word"), "", dim),
        (0, _) => words,
        (_, 0) => anchors,
        _ => {
            let mut v = unit(&anchors);
            axpy(&mut v, noise, &unit(&words));
            v
        }
    };
    Ok(Embedding::normalized(&v)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorldConfig {
    pub seed: u64,
    pub dim: usize,
    pub concept_count: usize,
    pub image_noise: f64,
    pub text_noise: f64,
    /// Required gap between mean intra- and inter-concept image similarity.
    #[serde(default = "default_separation")]
    pub min_separation: f64,
}

fn default_separation() -> f64 {
    0.05
}

impl Default for SyntheticWorldConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dim: 64,
            concept_count: 64,
            image_noise: 0.8,
            text_noise: 0.8,
            min_separation: default_separation(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTextEncoder {
    seed: u64,
    noise: f64,
    descriptor: EncoderDescriptor,
}

impl SyntheticTextEncoder {
    pub fn new(seed: u64, dim: usize, noise: f64) -> Result<Self, EncoderError> {
        check_params(dim, noise)?;
        Ok(Self {
            seed,
            noise,
            descriptor: EncoderDescriptor {
                kind: EncoderKind::Text,
                dim,
                identifier: format!("synthetic-text(seed={seed},dim={dim})"),
            },
        })
    }
}

impl TextEncoder for SyntheticTextEncoder {
    fn descriptor(&self) -> &EncoderDescriptor {
        &self.descriptor
    }

    fn encode_text(&self, texts: &[&str]) -> Result<Vec<Embedding>, EncoderError> {
        if texts.is_empty() {
            return Err(EncoderError::EmptyBatch);
        }
        texts
            .iter()
            .map(|t| embed_text(self.seed, "text", self.descriptor.dim, self.noise, t))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticMultimodalEncoder {
    seed: u64,
    text_noise: f64,
    image_noise: f64,
    descriptor: EncoderDescriptor,
}

impl SyntheticMultimodalEncoder {
    pub fn new(seed: u64, dim: usize, text_noise: f64, image_noise: f64) -> Result<Self, EncoderError> {
        check_params(dim, text_noise)?;
        check_params(dim, image_noise)?;
        Ok(Self {
            seed,
            text_noise,
            image_noise,
            descriptor: EncoderDescriptor {
                kind: EncoderKind::Multimodal,
                dim,
                identifier: format!("synthetic-mm(seed={seed},dim={dim})"),
            },
        })
    }
}

impl MultimodalEncoder for SyntheticMultimodalEncoder {
    fn descriptor(&self) -> &EncoderDescriptor {
        &self.descriptor
    }

    fn encode_query(&self, text: &str) -> Result<Embedding, EncoderError> {
        embed_text(self.seed, "mm", self.descriptor.dim, self.text_noise, text)
    }

    fn encode_image(&self, image_ref: &str) -> Result<Embedding, EncoderError> {
        let concept = concept_of_ref(image_ref)?;
        let dim = self.descriptor.dim;
        let mut v = unit(&gaussian(self.seed, "mm/anchor", concept, dim));
        axpy(&mut v, self.image_noise, &unit(&gaussian(self.seed, "mm/image", image_ref, dim)));
        Ok(Embedding::normalized(&v)?)
    }
}

/// Captions are the concept label followed by two modifier words picked
/// from the reference's hash.
#[derive(Debug, Clone)]
pub struct SyntheticDescriber {
    seed: u64,
}

impl SyntheticDescriber {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl SceneDescriber for SyntheticDescriber {
    fn describe(&self, image_ref: &str) -> Result<String, EncoderError> {
        let concept = concept_of_ref(image_ref).map_err(|e| EncoderError::Describer(e.to_string()))?;
        let a = MODIFIERS[pick(self.seed, "caption/0", image_ref, MODIFIERS.len())];
        let b = MODIFIERS[pick(self.seed, "caption/1", image_ref, MODIFIERS.len())];
        Ok(format!("{concept}, {a} and {b}"))
    }
}

fn check_params(dim: usize, noise: f64) -> Result<(), EncoderError> {
    if dim == 0 {
        return Err(EncoderError::Config("dimension must be positive".into()));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(EncoderError::Config(format!("noise must be finite and non-negative, got {noise}")));
    }
    Ok(())
}

/// Bundle of synthetic encoders sharing one seed and one concept vocabulary.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    cfg: SyntheticWorldConfig,
    text: SyntheticTextEncoder,
    mm: SyntheticMultimodalEncoder,
    describer: SyntheticDescriber,
    separation: f64,
}

impl SyntheticWorld {
    /// Builds the world and checks that concepts are separable: the mean
    /// cosine similarity between two images of the same concept must exceed
    /// that between images of different concepts by `min_separation`.
    pub fn new(cfg: SyntheticWorldConfig) -> Result<Self, EncoderError> {
        if cfg.concept_count < 2 {
            return Err(EncoderError::Config("concept_count must be at least 2".into()));
        }
        let text = SyntheticTextEncoder::new(cfg.seed, cfg.dim, cfg.text_noise)?;
        let mm = SyntheticMultimodalEncoder::new(cfg.seed, cfg.dim, cfg.text_noise, cfg.image_noise)?;
        let mut world = Self {
            cfg,
            text,
            mm,
            describer: SyntheticDescriber::new(cfg.seed),
            separation: 0.0,
        };
        world.separation = world.measure_separation()?;
        if world.separation < cfg.min_separation {
            return Err(EncoderError::Config(format!(
                "concepts not separable: intra-inter similarity gap {:.4} < {}",
                world.separation, cfg.min_separation
            )));
        }
        Ok(world)
    }

    fn measure_separation(&self) -> Result<f64, EncoderError> {
        let k = self.cfg.concept_count.min(32);
        let mut firsts = Vec::with_capacity(k);
        let mut intra = 0.0;
        for i in 0..k {
            let label = concept_label(i);
            let a = self.mm.encode_image(&format!("{label}/probe-a"))?;
            let b = self.mm.encode_image(&format!("{label}/probe-b"))?;
            intra += cosine_unchecked(&a, &b);
            firsts.push(a);
        }
        let mut inter = 0.0;
        for i in 0..k {
            inter += cosine_unchecked(&firsts[i], &firsts[(i + 1) % k]);
        }
        Ok((intra - inter) / k as f64)
    }

    pub fn config(&self) -> &SyntheticWorldConfig {
        &self.cfg
    }

    /// Measured intra/inter separation gap.
    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn labels(&self) -> impl Iterator<Item = String> {
        (0..self.cfg.concept_count).map(concept_label)
    }

    pub fn text_encoder(&self) -> &SyntheticTextEncoder {
        &self.text
    }

    pub fn multimodal_encoder(&self) -> &SyntheticMultimodalEncoder {
        &self.mm
    }

    pub fn describer(&self) -> &SyntheticDescriber {
        &self.describer
    }

    /// A query mentioning `label` with two modifier words derived from `key`.
    pub fn query_text(&self, label: &str, key: &str) -> String {
        let a = MODIFIERS[pick(self.cfg.seed, "query/0", key, MODIFIERS.len())];
        let b = MODIFIERS[pick(self.cfg.seed, "query/1", key, MODIFIERS.len())];
        format!("the {a} {b} {label}")
    }
}
