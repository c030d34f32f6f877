use std::path::PathBuf;

use clap::Args;
use selmem_core::{
    classify_intent, extract_profile_facts, hybrid_retrieve, Intent, Modality, NewEpisode, RetrievalError, RuleBasedClassifier,
    Store, UserId,
};

use super::{resolve_speaker, Speaker};
use crate::config::CliConfig;
use crate::error::{CliError, Result};
use crate::setup::{self, Encoders};

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Utterance
    #[arg(required = true, num_args = 1..)]
    pub text: Vec<String>,
    /// Existing user id
    #[arg(long, conflicts_with = "name")]
    pub user: Option<String>,
    /// Speaker name; identifies or creates the user
    #[arg(long)]
    pub name: Option<String>,
    /// Session transcript saved when the utterance ends the session
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Clock in milliseconds since the epoch (episode timestamp, new-user id date)
    #[arg(long)]
    pub at: Option<u64>,
    /// Print the retrieval result as JSON
    #[arg(long)]
    pub json: bool,
}

pub fn run(cfg: &CliConfig, args: &QueryArgs) -> Result<()> {
    let text = args.text.join(" ");
    let patterns = cfg.intent_patterns()?;
    let classifier = RuleBasedClassifier::new(&patterns)?;
    let mut store = setup::open_store(cfg)?;
    let user = match resolve_speaker(&mut store, args.user.as_deref(), args.name.as_deref(), setup::today(args.at))? {
        Speaker::Known { user, created } => {
            if created {
                println!("Nice to meet you. New user {user}.");
            }
            user
        }
        Speaker::Clarify { candidate, name_ratio } => {
            let name = store.user(&candidate).map(|p| p.display_name.as_str()).unwrap_or("");
            println!("Did you mean {name} ({candidate})? The name match is {name_ratio:.2}; re-run with --user {candidate}.");
            return Ok(());
        }
        Speaker::Anonymous => {
            println!("Memory is off until you tell me your name (pass --name or --user).");
            return Ok(());
        }
    };

    match classify_intent(&text, &classifier) {
        Intent::Continue => retrieve(cfg, args, &text, &user, &store),
        Intent::ProfileUpdate => update_profile(&mut store, &user, &text),
        Intent::SessionEnd => end_session(cfg, args, &text, &user, &mut store),
    }
}

fn retrieve(cfg: &CliConfig, args: &QueryArgs, text: &str, user: &UserId, store: &Store) -> Result<()> {
    let enc: Encoders = setup::encoders(cfg)?;
    let result = match hybrid_retrieve(text, user, &cfg.retrieval()?, store, enc.text.as_ref(), enc.mm.as_ref()) {
        Ok(r) => r,
        Err(RetrievalError::NoMemories(_)) => {
            println!("I don't have any memories with you yet.");
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&result).map_err(|e| CliError::Failed(e.to_string()))?);
        return Ok(());
    }
    let winner = match result.winner {
        Modality::Episode => "episode",
        Modality::Scene => "scene",
    };
    println!("winner: {winner}{}", if result.degraded { " (one memory pool is empty)" } else { "" });
    if let Some(h) = &result.episode {
        let ep = store.episode(h.id).expect("hit comes from the store");
        let how = if h.paired_by_timestamp { "paired by time" } else { "best match" };
        println!(
            "episode {}  t={}  score={:.4}  z={:.4}  {how}\n  {}",
            h.id, h.timestamp, h.raw_score, h.normalized_score, ep.transcript
        );
    }
    if let Some(h) = &result.scene {
        let sc = store.scene(h.id).expect("hit comes from the store");
        let how = if h.paired_by_timestamp { "paired by time" } else { "best match" };
        let caption = if sc.caption.is_empty() { "(no caption)" } else { &sc.caption };
        println!(
            "scene {}  t={}  score={:.4}  z={:.4}  {how}\n  {caption}  [{}]",
            h.id,
            h.timestamp,
            h.raw_score,
            h.normalized_score,
            sc.image_ref.as_deref().unwrap_or("-")
        );
    }
    Ok(())
}

fn update_profile(store: &mut Store, user: &UserId, text: &str) -> Result<()> {
    let facts = extract_profile_facts(text);
    if facts.is_empty() {
        println!("Noted, but I found nothing to add to your profile.");
        return Ok(());
    }
    let mut profile = store.user(user).cloned().expect("resolved user exists");
    if profile.display_name.is_empty() {
        if let Some(name) = facts.get("name") {
            profile.display_name = name.clone();
        }
    }
    profile.profile_facts.extend(facts.clone());
    store.put_user(profile)?;
    for (k, v) in &facts {
        println!("remembered {k}: {v}");
    }
    Ok(())
}

fn end_session(cfg: &CliConfig, args: &QueryArgs, text: &str, user: &UserId, store: &mut Store) -> Result<()> {
    let transcript = match &args.transcript {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        None => text.to_string(),
    };
    if transcript.trim().is_empty() {
        println!("Goodbye. Nothing to remember from this session.");
        return Ok(());
    }
    let enc = setup::encoders(cfg)?;
    let text_embedding = enc.text.encode_one(&transcript)?;
    let id = store.put_episode(NewEpisode {
        user_id: user.clone(),
        timestamp: setup::timestamp(args.at),
        transcript,
        text_embedding,
    })?;
    println!("Goodbye. Saved this conversation as {id}.");
    Ok(())
}
