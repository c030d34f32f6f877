mod common;

use common::{oracle, Fixed, Instance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use selmem_core::encoders::EncoderKind;
use selmem_core::{hybrid_retrieve, Embedding, Modality, NewEpisode, NewScene, RetrievalConfig, RetrievalError, Store, Timestamp};

fn run(inst: &Instance, alpha: f64) -> (Option<usize>, Option<usize>, Modality) {
    let (store, user, eids, sids) = inst.store();
    let (text, mm) = inst.encoders();
    let cfg = RetrievalConfig::new(alpha, 1e-8).unwrap();
    let r = hybrid_retrieve("query", &user, &cfg, &store, &text, &mm).unwrap();
    let e = r.episode.map(|h| eids.iter().position(|id| *id == h.id).unwrap());
    let s = r.scene.map(|h| sids.iter().position(|id| *id == h.id).unwrap());
    (e, s, r.winner)
}

#[test]
fn matches_reference_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..400 {
        let inst = Instance::random(&mut rng);
        for alpha in [0.0, 0.3, 0.7, 1.0] {
            let (e, s, _) = run(&inst, alpha);
            assert_eq!((e, s), oracle(&inst, alpha, 1e-8), "case {case}, alpha {alpha}");
        }
    }
}

fn unit(dim: usize, k: usize) -> Vec<f32> {
    let mut v = vec![0.0; dim];
    v[k] = 1.0;
    v
}

#[test]
fn query_equal_to_a_scene_image_wins_at_alpha_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut inst = Instance::random(&mut rng);
    while inst.scenes.len() < 5 || inst.episodes.is_empty() {
        inst = Instance::random(&mut rng);
    }
    let target = inst.scenes.len() / 2;
    inst.q_mm = inst.scenes[target].img.clone();
    // the exact match dominates its pool; make the text side flat
    for e in &mut inst.episodes {
        e.v = inst.q_text.clone();
    }
    let (_, s, winner) = run(&inst, 1.0);
    assert_eq!(s, Some(target));
    assert_eq!(winner, Modality::Scene);
}

#[test]
fn hand_set_five_by_five() {
    let dim = 5;
    let mut store = Store::in_memory(dim, dim).unwrap();
    let user = store.create_user("Ann", None, common::day()).unwrap();
    let mut eids = Vec::new();
    let mut sids = Vec::new();
    for k in 0..5 {
        eids.push(
            store
                .put_episode(NewEpisode {
                    user_id: user.clone(),
                    timestamp: Timestamp(10 * k as u64),
                    transcript: format!("episode {k}"),
                    text_embedding: Embedding::new(unit(dim, k)).unwrap(),
                })
                .unwrap(),
        );
        sids.push(
            store
                .put_scene(NewScene {
                    user_id: user.clone(),
                    timestamp: Timestamp(10 * k as u64 + 4),
                    scene_embedding: Embedding::new(unit(dim, k)).unwrap(),
                    caption: String::new(),
                    caption_embedding: None,
                    image_ref: None,
                    capture: selmem_core::decide_memorable(0.0, selmem_core::Novelty::FirstScene, 0.3),
                })
                .unwrap(),
        );
    }
    let cfg = RetrievalConfig::new(1.0, 1e-8).unwrap();

    // text query points at episode 2, image query is flat: episode wins and
    // the scene at t=24 is the nearest in time to t=20
    let text = Fixed::new(Embedding::new(unit(dim, 2)).unwrap(), EncoderKind::Text);
    let flat = Fixed::new(Embedding::new(vec![1.0; dim]).unwrap(), EncoderKind::Multimodal);
    let r = hybrid_retrieve("q", &user, &cfg, &store, &text, &flat).unwrap();
    assert_eq!(r.winner, Modality::Episode);
    assert_eq!(r.episode.as_ref().unwrap().id, eids[2]);
    assert_eq!(r.scene.as_ref().unwrap().id, sids[2]);
    assert!(r.scene.unwrap().paired_by_timestamp);

    // image query points at scene 4, text is flat: scene wins, paired with t=40
    let flat_text = Fixed::new(Embedding::new(vec![1.0; dim]).unwrap(), EncoderKind::Text);
    let img = Fixed::new(Embedding::new(unit(dim, 4)).unwrap(), EncoderKind::Multimodal);
    let r = hybrid_retrieve("q", &user, &cfg, &store, &flat_text, &img).unwrap();
    assert_eq!(r.winner, Modality::Scene);
    assert_eq!(r.scene.unwrap().id, sids[4]);
    assert_eq!(r.episode.unwrap().id, eids[4]);

    // both flat: both normalized maxima are zero and the episode wins
    let r = hybrid_retrieve("q", &user, &cfg, &store, &flat_text, &flat).unwrap();
    assert_eq!(r.winner, Modality::Episode);
    assert_eq!(r.episode.unwrap().id, eids[0]);
}

#[test]
fn no_captions_at_alpha_one_uses_images_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let mut inst = Instance::random(&mut rng);
        for s in &mut inst.scenes {
            s.cap = None;
        }
        let (e, s, _) = run(&inst, 1.0);
        assert_eq!((e, s), oracle(&inst, 1.0, 1e-8));
    }
}

#[test]
fn empty_store_reports_no_memories() {
    let store_dims = 4;
    let mut store = Store::in_memory(store_dims, store_dims).unwrap();
    let user = store.create_user("Ann", None, common::day()).unwrap();
    let t = Fixed::new(Embedding::new(vec![1.0; 4]).unwrap(), EncoderKind::Text);
    let m = Fixed::new(Embedding::new(vec![1.0; 4]).unwrap(), EncoderKind::Multimodal);
    let cfg = RetrievalConfig::default();
    assert!(matches!(hybrid_retrieve("q", &user, &cfg, &store, &t, &m), Err(RetrievalError::NoMemories(_))));
    let wrong = Fixed::new(Embedding::new(vec![1.0; 3]).unwrap(), EncoderKind::Text);
    store
        .put_episode(NewEpisode {
            user_id: user.clone(),
            timestamp: Timestamp(1),
            transcript: "x".into(),
            text_embedding: Embedding::new(vec![1.0; 4]).unwrap(),
        })
        .unwrap();
    assert!(hybrid_retrieve("q", &user, &cfg, &store, &wrong, &m).is_err());
}
