use chrono::{DateTime, NaiveDate, Utc};
use selmem_core::encoders::{
    EncoderError, EncoderKind, MultimodalEncoder, RemoteEncoder, SceneDescriber, SyntheticDescriber, SyntheticWorld,
    SyntheticWorldConfig, TextEncoder,
};
use selmem_core::{Store, StoreError, Timestamp, UserId};

use crate::config::CliConfig;
use crate::error::{CliError, Result};

pub struct Encoders {
    pub text: Box<dyn TextEncoder>,
    pub mm: Box<dyn MultimodalEncoder>,
    /// Captions always come from the synthetic describer; the remote
    /// protocol carries embeddings only.
    pub describer: Box<dyn SceneDescriber>,
}

impl From<EncoderError> for CliError {
    fn from(e: EncoderError) -> Self {
        match e {
            EncoderError::Config(_) => CliError::Config(e.to_string()),
            EncoderError::UnknownRef(_) | EncoderError::Detector(_) => CliError::Input(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

pub fn world(cfg: &CliConfig, dim: usize) -> Result<SyntheticWorld> {
    Ok(SyntheticWorld::new(SyntheticWorldConfig {
        seed: cfg.seed,
        dim,
        concept_count: cfg.world.concept_count,
        image_noise: cfg.world.image_noise,
        text_noise: cfg.world.text_noise,
        ..SyntheticWorldConfig::default()
    })?)
}

pub fn encoders(cfg: &CliConfig) -> Result<Encoders> {
    let describer = Box::new(SyntheticDescriber::new(cfg.seed));
    match cfg.encoder.strip_prefix("remote:") {
        Some(endpoint) => Ok(Encoders {
            text: Box::new(RemoteEncoder::new(endpoint, EncoderKind::Text, cfg.dim_text)),
            mm: Box::new(RemoteEncoder::new(endpoint, EncoderKind::Multimodal, cfg.dim_mm)),
            describer,
        }),
        None => {
            let w = world(cfg, cfg.dim_mm)?;
            Ok(Encoders {
                text: Box::new(w.text_encoder().clone()),
                mm: Box::new(w.multimodal_encoder().clone()),
                describer,
            })
        }
    }
}

fn check_dims(cfg: &CliConfig, store: &Store) -> Result<()> {
    let m = store.manifest();
    if (m.embedding_dim_text, m.embedding_dim_mm) != (cfg.dim_text, cfg.dim_mm) {
        return Err(CliError::Config(format!(
            "store {} holds text/multimodal dims {}/{}, config says {}/{}",
            cfg.store.display(),
            m.embedding_dim_text,
            m.embedding_dim_mm,
            cfg.dim_text,
            cfg.dim_mm
        )));
    }
    Ok(())
}

/// Opens an existing store; a missing directory is a not-found error.
pub fn open_store(cfg: &CliConfig) -> Result<Store> {
    if !cfg.store.is_dir() {
        return Err(CliError::NotFound(format!("no store at {}", cfg.store.display())));
    }
    let store = Store::open(&cfg.store)?;
    check_dims(cfg, &store)?;
    Ok(store)
}

pub fn open_or_create_store(cfg: &CliConfig) -> Result<Store> {
    let store = Store::open_or_create(&cfg.store, cfg.dim_text, cfg.dim_mm)?;
    check_dims(cfg, &store)?;
    Ok(store)
}

/// `--at` in milliseconds, or the wall clock.
pub fn timestamp(at: Option<u64>) -> Timestamp {
    at.map(Timestamp).unwrap_or_else(Timestamp::now)
}

/// Calendar day used when allocating user ids.
pub fn today(at: Option<u64>) -> NaiveDate {
    let ms = timestamp(at).millis();
    DateTime::<Utc>::from_timestamp_millis(ms as i64)
        .map(|d| d.date_naive())
        .unwrap_or_default()
}

pub fn parse_user(id: &str) -> Result<UserId> {
    id.parse().map_err(|e: StoreError| CliError::NotFound(e.to_string()))
}

pub fn require_user(store: &Store, id: &str) -> Result<UserId> {
    let user = parse_user(id)?;
    if !store.contains_user(&user) {
        return Err(CliError::NotFound(format!("unknown user {user}")));
    }
    Ok(user)
}
