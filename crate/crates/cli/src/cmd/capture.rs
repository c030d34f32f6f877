use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use selmem_core::encoders::EmotionDetector;
use selmem_core::{capture_frame, CaptureDecision, FrameInput, Novelty, SceneId, Trigger};
use serde::Serialize;

use super::{resolve_speaker, write_json, Speaker};
use crate::config::CliConfig;
use crate::error::{CliError, Result};
use crate::{session, setup};

#[derive(Debug, Args)]
pub struct CaptureArgs {
    /// Session file (JSON lines)
    pub session: PathBuf,
    /// Existing user id
    #[arg(long, conflicts_with = "name")]
    pub user: Option<String>,
    /// Speaker name; identifies or creates the user
    #[arg(long)]
    pub name: Option<String>,
    /// Clock for new-user ids, in milliseconds since the epoch
    #[arg(long)]
    pub at: Option<u64>,
    /// Directory for capture.json
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct FrameReport {
    line: usize,
    timestamp: u64,
    image_ref: String,
    stored: Option<SceneId>,
    decision: CaptureDecision,
    #[serde(skip_serializing_if = "Option::is_none")]
    caption_error: Option<String>,
}

#[derive(Debug, Default, Serialize)]
struct Summary {
    frames: usize,
    stored: usize,
    skipped: usize,
    /// Stored frames per trigger; a frame may count under several.
    triggers: BTreeMap<Trigger, usize>,
}

#[derive(Debug, Serialize)]
struct Report {
    user: String,
    frames: Vec<FrameReport>,
    summary: Summary,
}

fn triggers(d: &CaptureDecision) -> String {
    if d.triggered_by.is_empty() {
        return "-".into();
    }
    d.triggered_by.iter().map(Trigger::to_string).collect::<Vec<_>>().join("+")
}

fn novelty(n: Novelty) -> String {
    match n {
        Novelty::FirstScene => "first".into(),
        Novelty::Distance(d) => format!("{d:.3}"),
    }
}

pub fn run(cfg: &CliConfig, args: &CaptureArgs) -> Result<()> {
    let session = session::load(&args.session)?;
    let capture_cfg = cfg.capture()?;
    let enc = setup::encoders(cfg)?;
    let mut store = setup::open_or_create_store(cfg)?;
    let user = match resolve_speaker(&mut store, args.user.as_deref(), args.name.as_deref(), setup::today(args.at))? {
        Speaker::Known { user, created } => {
            if created {
                println!("new user {user}");
            }
            user
        }
        Speaker::Clarify { candidate, name_ratio } => {
            return Err(CliError::Input(format!(
                "name is close to user {candidate} (ratio {name_ratio:.2}); pass --user to confirm"
            )))
        }
        Speaker::Anonymous => {
            return Err(CliError::Input("capture needs --user or --name; memory is kept only for named users".into()))
        }
    };

    let mut frames = Vec::with_capacity(session.frames.len());
    let mut summary = Summary { frames: session.frames.len(), ..Summary::default() };
    for f in &session.frames {
        let at_line = |e: CliError| CliError::Input(format!("{}:{}: {e}", args.session.display(), f.line));
        let emotions = session.detector.detect(&f.image_ref).map_err(|e| at_line(e.into()))?;
        let scene_embedding = enc.mm.encode_image(&f.image_ref).map_err(|e| match CliError::from(e) {
            CliError::Input(m) => at_line(CliError::Input(m)),
            other => other,
        })?;
        let input = FrameInput {
            user_id: user.clone(),
            timestamp: f.timestamp,
            scene_embedding,
            emotions,
            complexity: f.complexity,
            image_ref: Some(f.image_ref.clone()),
        };
        let out = capture_frame(&input, &capture_cfg, &mut store, enc.describer.as_ref(), enc.text.as_ref())
            .map_err(|e| match CliError::from(e) {
                CliError::Input(m) => at_line(CliError::Input(m)),
                other => other,
            })?;
        let d = &out.decision;
        let what = match out.stored {
            Some(id) => format!("stored {id}"),
            None => "skipped".into(),
        };
        println!(
            "{:>4}  t={:<13} {:<24} {:<16} trigger={:<20} e={:.3} n={} score={:.3}",
            f.line,
            f.timestamp,
            f.image_ref,
            what,
            triggers(d),
            d.salience,
            novelty(d.novelty),
            d.mem_score.unwrap_or(0.0)
        );
        if let Some(e) = &out.caption_error {
            println!("      caption unavailable: {e}");
        }
        if out.stored.is_some() {
            summary.stored += 1;
            for t in &d.triggered_by {
                *summary.triggers.entry(*t).or_default() += 1;
            }
        } else {
            summary.skipped += 1;
        }
        frames.push(FrameReport {
            line: f.line,
            timestamp: f.timestamp.millis(),
            image_ref: f.image_ref.clone(),
            stored: out.stored,
            decision: out.decision,
            caption_error: out.caption_error,
        });
    }

    let breakdown = [Trigger::Emotion, Trigger::Novelty, Trigger::FirstScene]
        .iter()
        .map(|t| format!("{t} {}", summary.triggers.get(t).copied().unwrap_or(0)))
        .collect::<Vec<_>>()
        .join(", ");
    println!(
        "user {user}: {} frames, {} stored, {} skipped ({breakdown})",
        summary.frames, summary.stored, summary.skipped
    );
    if let Some(dir) = &args.out {
        write_json(dir, "capture.json", &Report { user: user.to_string(), frames, summary })?;
    }
    Ok(())
}
