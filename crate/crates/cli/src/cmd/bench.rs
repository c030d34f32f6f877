use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use chrono::NaiveDate;
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selmem_core::encoders::concept_label;
use selmem_core::novelty::Novelty;
use selmem_core::{decide_memorable, hybrid_retrieve, Embedding, NewEpisode, NewScene, Store, Timestamp};
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::write_json;
use crate::config::CliConfig;
use crate::error::{CliError, Result};
use crate::setup;

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenes and episodes each
    #[arg(long, default_value_t = 10_000)]
    pub size: usize,
    /// Embedding dimension of both spaces
    #[arg(long, default_value_t = 512)]
    pub dim: usize,
    #[arg(long, default_value_t = 100)]
    pub queries: usize,
    /// Directory for bench.json
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct BenchReport {
    size: usize,
    dim: usize,
    queries: usize,
    seed: u64,
    mean_ms: f64,
    std_ms: f64,
    p95_ms: f64,
    result_ids_sha256: String,
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Embedding {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Ok(e) = Embedding::new(v) {
            return e;
        }
    }
}

fn build(size: usize, dim: usize, seed: u64) -> Result<(Store, selmem_core::UserId)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = Store::in_memory(dim, dim)?;
    let day = NaiveDate::from_ymd_opt(2025, 1, 1).expect("valid date");
    let user = store.create_user("Bench", None, day)?;
    for i in 0..size as u64 {
        store.put_scene(NewScene {
            user_id: user.clone(),
            timestamp: Timestamp(i * 1000),
            scene_embedding: random_unit(&mut rng, dim),
            caption: format!("scene {i}"),
            caption_embedding: Some(random_unit(&mut rng, dim)),
            image_ref: None,
            capture: decide_memorable(0.0, Novelty::FirstScene, 0.3),
        })?;
        store.put_episode(NewEpisode {
            user_id: user.clone(),
            timestamp: Timestamp(i * 1000 + 500),
            transcript: format!("episode {i}"),
            text_embedding: random_unit(&mut rng, dim),
        })?;
    }
    Ok((store, user))
}

pub fn run(cfg: &CliConfig, args: &BenchArgs) -> Result<()> {
    if args.size == 0 || args.dim == 0 || args.queries == 0 {
        return Err(CliError::Config("--size, --dim and --queries must be positive".into()));
    }
    let (store, user) = build(args.size, args.dim, cfg.seed)?;
    let world = setup::world(cfg, args.dim)?;
    let retrieval = cfg.retrieval()?;
    let mut times = Vec::with_capacity(args.queries);
    let mut ids = String::new();
    for q in 0..args.queries {
        let label = concept_label(q % cfg.world.concept_count);
        let text = world.query_text(&label, &format!("bench-{q}"));
        let start = Instant::now();
        let r = hybrid_retrieve(&text, &user, &retrieval, &store, world.text_encoder(), world.multimodal_encoder())?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
        let ep = r.episode.map(|h| h.id.to_string()).unwrap_or_default();
        let sc = r.scene.map(|h| h.id.to_string()).unwrap_or_default();
        let _ = writeln!(ids, "{ep} {sc}");
    }
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let std = (times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    // nearest-rank percentile
    let p95 = sorted[((0.95 * n).ceil() as usize).clamp(1, sorted.len()) - 1];
    let digest: String = Sha256::digest(ids.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();

    println!(
        "store {} scenes + {} episodes, dim {}, {} queries (seed {})",
        args.size, args.size, args.dim, args.queries, cfg.seed
    );
    println!("latency ms: mean {mean:.4}  std {std:.4}  p95 {p95:.4}");
    println!("result ids sha256 {digest}");
    if let Some(dir) = &args.out {
        let report = BenchReport {
            size: args.size,
            dim: args.dim,
            queries: args.queries,
            seed: cfg.seed,
            mean_ms: mean,
            std_ms: std,
            p95_ms: p95,
            result_ids_sha256: digest,
        };
        write_json(dir, "bench.json", &report)?;
    }
    Ok(())
}
