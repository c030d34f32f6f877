//! Encoder, describer and emotion-detector interfaces.
//!
//! Real models plug in through [`remote::RemoteEncoder`] or by implementing
//! the traits directly. The [`synthetic`] implementations are deterministic
//! stand-ins used by tests, benchmarks and the CLI's default mode.

pub mod fixture;
pub mod remote;
pub mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::salience::EmotionVector;
use crate::vector::{Embedding, VectorError};

pub use fixture::{FixtureDetector, FixtureRecord};
pub use remote::RemoteEncoder;
pub use synthetic::{
    concept_label, concept_of_ref, SyntheticDescriber, SyntheticMultimodalEncoder, SyntheticTextEncoder,
    SyntheticWorld, SyntheticWorldConfig,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncoderError {
    #[error("encoder called with an empty batch")]
    EmptyBatch,
    #[error("unknown or unresolvable reference {0:?}")]
    UnknownRef(String),
    #[error("scene describer failed: {0}")]
    Describer(String),
    #[error("emotion detector failed: {0}")]
    Detector(String),
    #[error("encoder at {endpoint} unavailable after {attempts} attempt(s): {reason}")]
    Unavailable {
        endpoint: String,
        attempts: u32,
        reason: String,
    },
    #[error("encoder protocol error: {0}")]
    Protocol(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Vector(#[from] VectorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Text,
    Multimodal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderDescriptor {
    pub kind: EncoderKind,
    pub dim: usize,
    pub identifier: String,
}

/// Maps text into the text-embedding space.
pub trait TextEncoder: Send + Sync {
    fn descriptor(&self) -> &EncoderDescriptor;

    /// One embedding per input, in input order.
    fn encode_text(&self, texts: &[&str]) -> Result<Vec<Embedding>, EncoderError>;

    fn encode_one(&self, text: &str) -> Result<Embedding, EncoderError> {
        self.encode_text(&[text])?
            .pop()
            .ok_or_else(|| EncoderError::Protocol("encoder returned no embedding".into()))
    }
}

/// Maps both query text and images into one shared space.
pub trait MultimodalEncoder: Send + Sync {
    fn descriptor(&self) -> &EncoderDescriptor;
    fn encode_query(&self, text: &str) -> Result<Embedding, EncoderError>;
    fn encode_image(&self, image_ref: &str) -> Result<Embedding, EncoderError>;
}

/// Produces a short caption for a captured scene.
pub trait SceneDescriber: Send + Sync {
    fn describe(&self, image_ref: &str) -> Result<String, EncoderError>;
}

/// Estimates per-category emotion intensities for the most prominent face.
pub trait EmotionDetector: Send + Sync {
    fn detect(&self, frame_ref: &str) -> Result<EmotionVector, EncoderError>;
}

/// Lowercased word tokens. Hyphens inside a word are kept so that labels
/// such as `dog-park` survive as one token.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '-'))
        .map(|t| t.trim_matches('-').to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}
