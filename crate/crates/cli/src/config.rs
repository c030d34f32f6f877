//! `selmem.toml` plus command-line overrides. Flags mirror config keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use selmem_core::eval::{BenchmarkConfig, CvConfig};
use selmem_core::identity::IntentPatterns;
use selmem_core::{CaptureConfig, CaptureWeights, Emotion, EmotionThresholds, NoveltyConfig, RetrievalConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub store: PathBuf,
    /// `synthetic` or `remote:<host:port>`.
    pub encoder: String,
    pub seed: u64,
    pub dim_text: usize,
    pub dim_mm: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub t_n: f64,
    /// `[w_e, w_n, w_c]`.
    pub weights: [f64; 3],
    /// Per-emotion overrides of the 0.6 default.
    pub emotion_thresholds: BTreeMap<Emotion, f64>,
    pub intent_patterns: Option<PathBuf>,
    pub world: WorldConfig,
    pub cv: CvConfig,
    pub benchmark: BenchmarkConfig,
}

/// Synthetic encoder settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub concept_count: usize,
    pub image_noise: f64,
    pub text_noise: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self { concept_count: 64, image_noise: 0.8, text_noise: 0.8 }
    }
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            store: PathBuf::from("selmem-store"),
            encoder: "synthetic".into(),
            seed: 0,
            dim_text: 64,
            dim_mm: 64,
            alpha: 0.7,
            epsilon: 1e-8,
            t_n: 0.3,
            weights: [0.5, 0.5, 0.0],
            emotion_thresholds: BTreeMap::new(),
            intent_patterns: None,
            world: WorldConfig::default(),
            cv: CvConfig::default(),
            benchmark: BenchmarkConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Store directory
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `synthetic` or `remote:<host:port>`
    #[arg(long, global = true)]
    pub encoder: Option<String>,
    /// Capture weights as `w_e,w_n,w_c`
    #[arg(long, global = true)]
    pub weights: Option<String>,
    /// Novelty threshold
    #[arg(long = "t-n", global = true)]
    pub t_n: Option<f64>,
    /// Per-emotion thresholds as `happy=0.5,sad=0.7`
    #[arg(long = "emotion-thresholds", global = true)]
    pub emotion_thresholds: Option<String>,
    /// Intent pattern file (TOML)
    #[arg(long = "intent-patterns", global = true)]
    pub intent_patterns: Option<PathBuf>,
}

fn parse_weights(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!("--weights expects w_e,w_n,w_c, got {s:?}")));
    }
    let mut w = [0.0; 3];
    for (slot, p) in w.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| CliError::Config(format!("--weights: {p:?} is not a number")))?;
    }
    Ok(w)
}

fn parse_thresholds(s: &str) -> Result<BTreeMap<Emotion, f64>> {
    let mut out = BTreeMap::new();
    for pair in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--emotion-thresholds: expected name=value, got {pair:?}")))?;
        let e: Emotion = k.trim().parse().map_err(|e| CliError::Config(format!("--emotion-thresholds: {e}")))?;
        let t: f64 = v.trim().parse().map_err(|_| CliError::Config(format!("--emotion-thresholds: {v:?} is not a number")))?;
        out.insert(e, t);
    }
    Ok(out)
}

impl CliConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", origin.display())))
    }

    /// Reads `--config` when given, applies flag overrides and validates.
    pub fn resolve(args: &GlobalArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                Self::from_toml(&text, path)?
            }
            None => Self::default(),
        };
        if let Some(v) = &args.store {
            cfg.store = v.clone();
        }
        if let Some(v) = args.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = args.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = args.seed {
            cfg.seed = v;
            cfg.cv.seed = v;
            cfg.benchmark.seed = v;
        }
        if let Some(v) = &args.encoder {
            cfg.encoder = v.clone();
        }
        if let Some(v) = &args.weights {
            cfg.weights = parse_weights(v)?;
        }
        if let Some(v) = args.t_n {
            cfg.t_n = v;
        }
        if let Some(v) = &args.emotion_thresholds {
            cfg.emotion_thresholds.extend(parse_thresholds(v)?);
        }
        if let Some(v) = &args.intent_patterns {
            cfg.intent_patterns = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.retrieval()?;
        self.capture()?;
        if self.dim_text == 0 || self.dim_mm == 0 {
            return Err(CliError::Config("embedding dimensions must be positive".into()));
        }
        if self.encoder != "synthetic" && !self.encoder.starts_with("remote:") {
            return Err(CliError::Config(format!("encoder must be `synthetic` or `remote:<endpoint>`, got {:?}", self.encoder)));
        }
        if self.encoder == "synthetic" && self.dim_text != self.dim_mm {
            return Err(CliError::Config(format!(
                "the synthetic encoders share one space; dim_text ({}) and dim_mm ({}) must match",
                self.dim_text, self.dim_mm
            )));
        }
        if let Some(p) = &self.intent_patterns {
            if !p.is_file() {
                return Err(CliError::Config(format!("intent pattern file {} not found", p.display())));
            }
        }
        self.cv.validate()?;
        Ok(())
    }

    pub fn retrieval(&self) -> Result<RetrievalConfig> {
        RetrievalConfig::new(self.alpha, self.epsilon).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn thresholds(&self) -> Result<EmotionThresholds> {
        let mut t = EmotionThresholds::default();
        for (e, v) in &self.emotion_thresholds {
            t = t.with(*e, *v).map_err(|err| CliError::Config(format!("threshold for {}: {err}", e.name())))?;
        }
        Ok(t)
    }

    pub fn capture(&self) -> Result<CaptureConfig> {
        let [e, n, c] = self.weights;
        Ok(CaptureConfig {
            thresholds: self.thresholds()?,
            novelty: NoveltyConfig::new(self.t_n).map_err(|err| CliError::Config(format!("t_n: {err}")))?,
            weights: CaptureWeights::new(e, n, c).map_err(|err| CliError::Config(format!("weights: {err}")))?,
        })
    }

    pub fn intent_patterns(&self) -> Result<IntentPatterns> {
        match &self.intent_patterns {
            Some(p) => Ok(IntentPatterns::load(p)?),
            None => Ok(IntentPatterns::default()),
        }
    }
}
