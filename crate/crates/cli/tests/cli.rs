use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use selmem_core::encoders::{MultimodalEncoder, SyntheticWorld, SyntheticWorldConfig, TextEncoder};
use selmem_core::Store;
use tempfile::TempDir;

struct Env {
    dir: TempDir,
}

impl Env {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn store(&self) -> PathBuf {
        self.path("store")
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_selmem"))
            .arg("--store")
            .arg(self.store())
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?} failed: {}", stderr(&out));
        stdout(&out)
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn frames(lines: &[String]) -> String {
    lines.join("\n") + "\n"
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn user_of(stdout: &str) -> String {
    let line = stdout.lines().find(|l| l.starts_with("new user ")).expect("a new user line");
    line["new user ".len()..].trim().to_string()
}

fn dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.clone(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn identical_frames_store_only_the_first() {
    let env = Env::new();
    let lines: Vec<String> = (0..10).map(|i| format!(r#"{{"t": {}, "ref": "dog-park/1"}}"#, 1000 * i)).collect();
    let s = env.write("s.jsonl", &frames(&lines));
    let out = env.ok(&["capture", s.to_str().unwrap(), "--name", "Dana", "--out", env.path("rep").to_str().unwrap()]);
    assert!(out.contains("10 frames, 1 stored, 9 skipped"), "{out}");
    assert!(out.contains("first_scene 1"), "{out}");

    let report = json(&env.path("rep/capture.json"));
    assert_eq!(report["summary"]["stored"], 1);
    assert_eq!(report["frames"][0]["decision"]["triggered_by"], serde_json::json!(["first_scene"]));
    for f in &report["frames"].as_array().unwrap()[1..] {
        assert!(f["stored"].is_null());
        assert_eq!(f["decision"]["novelty"]["distance"], 0.0, "{f}");
    }
}

#[test]
fn planted_happy_frame_is_stored_by_emotion() {
    let env = Env::new();
    let s = env.write(
        "s.jsonl",
        "{\"t\": 0, \"ref\": \"cafe-visit/1\"}\n{\"t\": 10, \"ref\": \"beach-party/1\", \"emotions\": {\"happy\": 0.9}}\n",
    );
    // a novelty threshold above any cosine distance leaves emotion as the only trigger
    let rep = env.path("rep");
    env.ok(&["--t-n", "2", "capture", s.to_str().unwrap(), "--name", "Dana", "--out", rep.to_str().unwrap()]);
    let f = &json(&rep.join("capture.json"))["frames"][1];
    assert!(!f["stored"].is_null());
    assert_eq!(f["decision"]["triggered_by"], serde_json::json!(["emotion"]));
    // (0.9 - 0.6) / (1 - 0.6)
    assert!((f["decision"]["salience"].as_f64().unwrap() - 0.75).abs() < 1e-12);

    // raising the happy threshold above 0.9 silences the frame
    let env = Env::new();
    let out = env.ok(&["--t-n", "2", "--emotion-thresholds", "happy=0.95", "capture", s.to_str().unwrap(), "--name", "Dana"]);
    assert!(out.contains("2 frames, 1 stored, 1 skipped"), "{out}");
}

#[test]
fn empty_session_reports_zero_frames() {
    let env = Env::new();
    let s = env.write("s.jsonl", "# nothing yet\n\n");
    let out = env.ok(&["capture", s.to_str().unwrap(), "--name", "Dana"]);
    assert!(out.contains("0 frames, 0 stored, 0 skipped"), "{out}");
}

#[test]
fn malformed_session_is_an_input_error_with_line() {
    let env = Env::new();
    let s = env.write("s.jsonl", "{\"t\": 0, \"ref\": \"cafe-visit/1\"}\n{\"t\": 1, \"ref\": }\n");
    let out = env.run(&["capture", s.to_str().unwrap(), "--name", "Dana"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("s.jsonl:2"), "{}", stderr(&out));

    let s = env.write("t.jsonl", "{\"t\": 5, \"ref\": \"cafe-visit/1\"}\n{\"t\": 1, \"ref\": \"cafe-visit/2\"}\n");
    let out = env.run(&["capture", s.to_str().unwrap(), "--name", "Dana"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("t.jsonl:2"), "{}", stderr(&out));

    let s = env.write("u.jsonl", "{\"t\": 5, \"ref\": \"nohyphen\"}\n");
    let out = env.run(&["capture", s.to_str().unwrap(), "--name", "Dana"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("u.jsonl:1"), "{}", stderr(&out));
}

#[test]
fn capture_requires_a_named_user() {
    let env = Env::new();
    let s = env.write("s.jsonl", "{\"t\": 0, \"ref\": \"cafe-visit/1\"}\n");
    assert_eq!(code(&env.run(&["capture", s.to_str().unwrap()])), 2);
    assert_eq!(code(&env.run(&["capture", s.to_str().unwrap(), "--user", "250101_0009"])), 3);
}

#[test]
fn users_list_and_delete() {
    let env = Env::new();
    Store::create(env.store(), 64, 64).unwrap();
    let out = env.ok(&["users", "list"]);
    assert_eq!(out.lines().count(), 1, "{out}");

    let s = env.write("s.jsonl", "{\"t\": 0, \"ref\": \"cafe-visit/1\"}\n{\"t\": 9, \"ref\": \"dog-park/1\"}\n");
    let u = user_of(&env.ok(&["capture", s.to_str().unwrap(), "--name", "Dana"]));
    env.ok(&["query", "--user", &u, "--at", "20", "goodbye"]);
    let listed = env.ok(&["users", "list"]);
    assert!(listed.contains(&u) && listed.contains("Dana"), "{listed}");
    assert!(!listed.contains("face"), "{listed}");

    let out = env.run(&["users", "delete", "990101_0001"]);
    assert_eq!(code(&out), 3);
    assert_eq!(code(&env.run(&["users", "delete", "not-an-id"])), 3);

    // profile + 2 scenes + 1 episode
    let out = env.ok(&["users", "delete", &u]);
    assert!(out.contains("4 records purged"), "{out}");
    assert!(!env.ok(&["users", "list"]).contains(&u));
    let reloaded = Store::load(env.store()).unwrap();
    assert_eq!(reloaded.users().count(), 0);
    assert_eq!(reloaded.scene_count() + reloaded.episode_count(), 0);
}

#[test]
fn missing_store_is_not_found() {
    let env = Env::new();
    assert_eq!(code(&env.run(&["users", "list"])), 3);
    assert_eq!(code(&env.run(&["inspect"])), 3);
    assert_eq!(code(&env.run(&["query", "--name", "Dana", "hello"])), 3);
}

#[test]
fn goodbye_persists_an_episode() {
    let env = Env::new();
    let s = env.write("s.jsonl", "{\"t\": 0, \"ref\": \"cafe-visit/1\"}\n");
    let u = user_of(&env.ok(&["capture", s.to_str().unwrap(), "--name", "Dana"]));
    let t = env.write("talk.txt", "We talked about the cafe-visit and the rain.\n");
    let out = env.ok(&["query", "--user", &u, "--transcript", t.to_str().unwrap(), "--at", "5000", "Goodbye!"]);
    assert!(out.contains("Saved this conversation as episode-"), "{out}");
    let store = Store::load(env.store()).unwrap();
    let eps: Vec<_> = store.episodes_of(&u.parse().unwrap()).collect();
    assert_eq!(eps.len(), 1);
    assert_eq!(eps[0].timestamp.millis(), 5000);
    assert!(eps[0].transcript.contains("cafe-visit and the rain"));
}

#[test]
fn profile_update_persists_facts() {
    let env = Env::new();
    let s = env.write("s.jsonl", "{\"t\": 0, \"ref\": \"cafe-visit/1\"}\n");
    let u = user_of(&env.ok(&["capture", s.to_str().unwrap(), "--name", "Dana"]));
    let out = env.ok(&["query", "--user", &u, "I live in Lisbon"]);
    assert!(out.contains("city: Lisbon"), "{out}");
    let store = Store::load(env.store()).unwrap();
    assert_eq!(store.user(&u.parse().unwrap()).unwrap().profile_facts["city"], "Lisbon");
}

#[test]
fn identification_routing() {
    let env = Env::new();
    let s = env.write("s.jsonl", "{\"t\": 0, \"ref\": \"cafe-visit/1\"}\n");
    env.ok(&["capture", s.to_str().unwrap(), "--name", "Dana", "--at", "1760000000000"]);

    let out = env.ok(&["query", "what did we see"]);
    assert!(out.contains("tell me your name"), "{out}");
    // ratio("dino", "dana") = (8 - 2) / 8 asks for confirmation
    let out = env.ok(&["query", "--name", "Dino", "what did we see"]);
    assert!(out.contains("Did you mean Dana (251009_0001)"), "{out}");
    // a different name creates a profile, then finds no memories
    let out = env.ok(&["query", "--name", "Bob", "--at", "1760000000000", "what did we see"]);
    assert!(out.contains("New user 251009_0002"), "{out}");
    assert!(out.contains("don't have any memories"), "{out}");
    assert_eq!(Store::load(env.store()).unwrap().users().count(), 2);
}

fn naive_cos(a: &[f32], b: &[f32]) -> f64 {
    let (mut d, mut x, mut y) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        d += a[i] as f64 * b[i] as f64;
        x += a[i] as f64 * a[i] as f64;
        y += b[i] as f64 * b[i] as f64;
    }
    d / (x.sqrt() * y.sqrt())
}

fn naive_z(v: &[f64]) -> Vec<f64> {
    if v.iter().all(|x| *x == v[0]) {
        return vec![0.0; v.len()];
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt();
    v.iter().map(|x| (x - m) / (sd + 1e-8)).collect()
}

fn first_max(v: &[f64]) -> usize {
    (1..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b })
}

fn closest(ts: &[u64], t: u64) -> usize {
    (1..ts.len()).fold(0, |b, j| {
        let (dj, db) = (ts[j].abs_diff(t), ts[b].abs_diff(t));
        if dj < db || (dj == db && ts[j] < ts[b]) {
            j
        } else {
            b
        }
    })
}

#[test]
fn continue_query_prints_the_oracle_pair_and_leaves_the_store_alone() {
    let env = Env::new();
    let concepts = ["dog-park", "beach-party", "cafe-visit", "museum-tour", "river-walk"];
    let lines: Vec<String> =
        concepts.iter().enumerate().map(|(i, c)| format!(r#"{{"t": {}, "ref": "{c}/1"}}"#, 1000 * i)).collect();
    let s = env.write("s.jsonl", &frames(&lines));
    let u = user_of(&env.ok(&["--t-n", "0", "capture", s.to_str().unwrap(), "--name", "Dana"]));
    for (i, c) in concepts.iter().enumerate() {
        env.ok(&["query", "--user", &u, "--at", &(1000 * i as u64 + 300).to_string(), &format!("bye, that {c} was fun")]);
    }

    let store = Store::load(env.store()).unwrap();
    let uid = u.parse().unwrap();
    let episodes: Vec<_> = store.episodes_of(&uid).collect();
    let scenes: Vec<_> = store.scenes_of(&uid).collect();
    assert_eq!((episodes.len(), scenes.len()), (5, 5));

    let world = SyntheticWorld::new(SyntheticWorldConfig::default()).unwrap();
    let before = dir_bytes(&env.store());
    for (query, alpha) in [("the river-walk in the morning", "0.7"), ("remember the dog-park", "0.3"), ("something new", "1")] {
        let out = env.ok(&["--alpha", alpha, "query", "--user", &u, "--json", query]);
        let got: serde_json::Value = serde_json::from_str(&out).unwrap();

        let a: f64 = alpha.parse().unwrap();
        let qt = world.text_encoder().encode_one(query).unwrap();
        let qm = world.multimodal_encoder().encode_query(query).unwrap();
        let s_ep: Vec<f64> = episodes.iter().map(|e| naive_cos(qt.values(), e.text_embedding.values())).collect();
        let s_sc: Vec<f64> = scenes
            .iter()
            .map(|s| {
                let img = naive_cos(qm.values(), s.scene_embedding.values());
                let cap = naive_cos(qt.values(), s.caption_embedding.as_ref().unwrap().values());
                a * img + (1.0 - a) * cap
            })
            .collect();
        let (ze, zs) = (naive_z(&s_ep), naive_z(&s_sc));
        let (i, j) = (first_max(&ze), first_max(&zs));
        let ep_ts: Vec<u64> = episodes.iter().map(|e| e.timestamp.millis()).collect();
        let sc_ts: Vec<u64> = scenes.iter().map(|s| s.timestamp.millis()).collect();
        let (want_e, want_s, winner) = if ze[i] > zs[j] || (ze[i] == 0.0 && zs[j] == 0.0) {
            (i, closest(&sc_ts, ep_ts[i]), "episode")
        } else {
            (closest(&ep_ts, sc_ts[j]), j, "scene")
        };
        assert_eq!(got["winner"], winner, "{query}");
        assert_eq!(got["episode"]["id"], episodes[want_e].id.0, "{query}");
        assert_eq!(got["scene"]["id"], scenes[want_s].id.0, "{query}");
    }
    assert!(dir_bytes(&env.store()) == before, "a retrieval query changed the store");
}

#[test]
fn eval_missing_input_is_exit_2_with_path() {
    let env = Env::new();
    let missing = env.path("ratings.csv");
    let f = env.write("features.csv", "");
    let out = env.run(&["eval", "memorability", "--ratings", missing.to_str().unwrap(), "--features", f.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains(missing.to_str().unwrap()), "{}", stderr(&out));
}

#[test]
fn eval_memorability_from_files() {
    let env = Env::new();
    let ratings = env.write(
        "ratings.csv",
        &(0..20).fold(String::from("image_id,r1,r2\n"), |acc, i| {
            format!("{acc}img{i},{},{}\n", 1 + (i * 7) % 9, 1 + (i * 7 + 1) % 9)
        }),
    );
    let mut features = String::from("image_id,neutral,happy,sad,surprise,fear,disgust,anger,contempt,novelty,complexity\n");
    for i in 0..20 {
        let happy = ((i * 7) % 9) as f64 / 9.0;
        features.push_str(&format!("img{i},0,{happy},0,0,0,0,0,0,0.1,0.5\n"));
    }
    let features = env.write("features.csv", &features);
    let cfg = env.write("c.toml", "[cv]\nrepeats = 2\nouter_folds = 2\ninner_folds = 2\n");
    let out = env.ok(&[
        "--config",
        cfg.to_str().unwrap(),
        "eval",
        "memorability",
        "--ratings",
        ratings.to_str().unwrap(),
        "--features",
        features.to_str().unwrap(),
    ]);
    assert!(out.contains("Human") && out.contains("Consistency"), "{out}");
    assert!(out.contains("Interval (n=10)") && out.contains("(0.0, 0.0, 1.0)"), "{out}");
}

#[test]
fn eval_memorability_recovers_planted_weights() {
    let env = Env::new();
    let cfg = env.write("c.toml", "seed = 12\n[cv]\nrepeats = 3\npasses = 10\n");
    let args = |out: &str| {
        vec![
            "--config".to_string(),
            cfg.to_str().unwrap().to_string(),
            "eval".into(),
            "memorability".into(),
            "--planted".into(),
            "--images".into(),
            "200".into(),
            "--noise-sd".into(),
            "0".into(),
            "--out".into(),
            env.path(out).to_str().unwrap().to_string(),
        ]
    };
    let a: Vec<String> = args("r1");
    let out = env.ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    let row = out.lines().find(|l| l.contains("(0.5, 0.5, 0.0)")).expect("planted row");
    let rho: f64 = row.split_whitespace().nth(4).unwrap().parse().unwrap();
    assert!(rho >= 0.999, "{row}");

    let b: Vec<String> = args("r2");
    env.ok(&b.iter().map(String::as_str).collect::<Vec<_>>());
    for f in ["memorability.txt", "memorability.json"] {
        assert_eq!(std::fs::read(env.path("r1").join(f)).unwrap(), std::fs::read(env.path("r2").join(f)).unwrap(), "{f}");
    }
    let report = json(&env.path("r1/memorability.json"));
    assert_eq!(report["models"].as_array().unwrap().len(), 6);
}

#[test]
fn eval_retrieval_fusion_beats_both_unimodal_rows() {
    let env = Env::new();
    let out = env.ok(&["--seed", "5", "eval", "retrieval", "--gallery-size", "200", "--out", env.path("r").to_str().unwrap()]);
    let r1 = |mode: &str| -> f64 {
        let l = out.lines().find(|l| l.starts_with(mode)).unwrap();
        l.split_whitespace().rev().nth(2).unwrap().parse().unwrap()
    };
    let fusion = r1("Fusion");
    assert!(fusion >= r1("Text") && fusion >= r1("Image"), "{out}");
    let table = json(&env.path("r/retrieval.json"));
    assert_eq!(table["fusion"].as_array().unwrap().len(), 11);
}

#[test]
fn bench_reports_three_statistics_deterministically() {
    let env = Env::new();
    let run = || env.ok(&["--seed", "4", "bench", "--size", "50", "--dim", "32", "--queries", "10"]);
    let (a, b) = (run(), run());
    let stats = a.lines().find(|l| l.starts_with("latency ms:")).unwrap();
    for k in ["mean", "std", "p95"] {
        assert!(stats.contains(k), "{stats}");
    }
    let digest = |s: &str| s.lines().find(|l| l.starts_with("result ids")).unwrap().to_string();
    assert_eq!(digest(&a), digest(&b));

    let one = env.ok(&["bench", "--size", "1", "--queries", "5", "--out", env.path("b").to_str().unwrap()]);
    assert!(one.contains("1 scenes + 1 episodes"), "{one}");
    let report = json(&env.path("b/bench.json"));
    assert!(report["mean_ms"].as_f64().unwrap() > 0.0);
}

#[test]
fn configuration_errors_exit_2() {
    let env = Env::new();
    for args in [
        vec!["--alpha", "1.5", "bench", "--size", "1"],
        vec!["--weights", "0.5,0.6,0", "bench", "--size", "1"],
        vec!["--weights", "0.5", "bench", "--size", "1"],
        vec!["--emotion-thresholds", "joy=0.5", "bench", "--size", "1"],
        vec!["--emotion-thresholds", "happy=1", "bench", "--size", "1"],
        vec!["--t-n", "3", "bench", "--size", "1"],
        vec!["--encoder", "carrier-pigeon", "bench", "--size", "1"],
        vec!["--intent-patterns", "/no/such/file.toml", "bench", "--size", "1"],
        vec!["bench", "--size", "0"],
        vec!["no-such-verb"],
    ] {
        let out = env.run(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
    }
    let cfg = env.write("bad.toml", "alpah = 0.5\n");
    let out = env.run(&["--config", cfg.to_str().unwrap(), "bench", "--size", "1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("alpah"), "{}", stderr(&out));
    assert_eq!(code(&env.run(&["--config", env.path("none.toml").to_str().unwrap(), "bench"])), 2);
}

#[test]
fn store_dimension_mismatch_is_a_config_error() {
    let env = Env::new();
    Store::create(env.store(), 32, 32).unwrap();
    assert_eq!(code(&env.run(&["users", "list"])), 2);
}

fn spawn_encoder() -> String {
    use selmem_core::encoders::remote::{serve_connection, EncodeResponse, Modality};
    use selmem_core::encoders::EncoderKind;
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let _ = serve_connection(stream.unwrap(), |req| {
                let (dim, image) = match req.kind {
                    EncoderKind::Text => (8, false),
                    EncoderKind::Multimodal => (4, req.modality == Modality::Image),
                };
                let embeddings = req
                    .inputs
                    .iter()
                    .map(|s| {
                        let mut v = vec![0.1f32; dim];
                        v[s.len() % dim] = if image { 5.0 } else { 1.0 + s.len() as f32 };
                        v
                    })
                    .collect();
                Ok(EncodeResponse { embeddings, dim })
            });
        }
    });
    addr
}

#[test]
fn remote_encoder_with_distinct_widths() {
    let env = Env::new();
    let addr = spawn_encoder();
    let cfg = env.write("c.toml", &format!("encoder = \"remote:{addr}\"\ndim_text = 8\ndim_mm = 4\n"));
    let c = cfg.to_str().unwrap();
    let s = env.write("s.jsonl", "{\"t\": 0, \"ref\": \"cafe-visit/1\"}\n{\"t\": 5, \"ref\": \"dog-park/12\"}\n");
    let out = env.ok(&["--config", c, "--t-n", "0", "capture", s.to_str().unwrap(), "--name", "Dana"]);
    assert!(out.contains("2 frames, 2 stored"), "{out}");
    let u = user_of(&out);
    env.ok(&["--config", c, "query", "--user", &u, "--at", "7", "goodbye then"]);
    let got: serde_json::Value = serde_json::from_str(&env.ok(&["--config", c, "query", "--user", &u, "--json", "the cafe"])).unwrap();
    assert!(got["episode"].is_object() && got["scene"].is_object(), "{got}");

    // the store keeps its widths; the default config no longer matches
    assert_eq!(code(&env.run(&["users", "list"])), 2);

    let dead = env.write("d.toml", "encoder = \"remote:127.0.0.1:1\"\n");
    let out = env.run(&["--config", dead.to_str().unwrap(), "query", "--user", &u, "the cafe"]);
    assert_eq!(code(&out), 2, "store widths differ from the default dims: {}", stderr(&out));
    let dead = env.write("e.toml", "encoder = \"remote:127.0.0.1:1\"\ndim_text = 8\ndim_mm = 4\n");
    let out = env.run(&["--config", dead.to_str().unwrap(), "query", "--user", &u, "the cafe"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("unavailable"), "{}", stderr(&out));
}
