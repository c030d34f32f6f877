//! Fixtures shared by the criterion benches.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selmem_core::novelty::Novelty;
use selmem_core::{decide_memorable, Embedding, NewEpisode, NewScene, Store, Timestamp, UserId};

pub fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Embedding {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Ok(e) = Embedding::new(v) {
            return e;
        }
    }
}

/// One user with `size` captioned scenes and `size` episodes in both spaces of width `dim`.
pub fn synthetic_store(size: usize, dim: usize, seed: u64) -> (Store, UserId) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = Store::in_memory(dim, dim).expect("positive dims");
    let user = store
        .create_user("Bench", None, NaiveDate::from_ymd_opt(2025, 1, 1).expect("valid date"))
        .expect("fresh store");
    for i in 0..size as u64 {
        store
            .put_scene(NewScene {
                user_id: user.clone(),
                timestamp: Timestamp(i * 1000),
                scene_embedding: random_unit(&mut rng, dim),
                caption: format!("scene {i}"),
                caption_embedding: Some(random_unit(&mut rng, dim)),
                image_ref: None,
                capture: decide_memorable(0.0, Novelty::FirstScene, 0.3),
            })
            .expect("valid record");
        store
            .put_episode(NewEpisode {
                user_id: user.clone(),
                timestamp: Timestamp(i * 1000 + 500),
                transcript: format!("episode {i}"),
                text_embedding: random_unit(&mut rng, dim),
            })
            .expect("valid record");
    }
    (store, user)
}
