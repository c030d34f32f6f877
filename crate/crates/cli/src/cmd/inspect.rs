use clap::Args;
use selmem_core::Novelty;

use crate::config::CliConfig;
use crate::error::{CliError, Result};
use crate::setup;

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// List one user's scenes and episodes
    #[arg(long)]
    pub user: Option<String>,
}

pub fn run(cfg: &CliConfig, args: &InspectArgs) -> Result<()> {
    let store = setup::open_store(cfg)?;
    let m = store.manifest();
    let Some(id) = &args.user else {
        let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Failed(e.to_string()))?;
        println!("store {}\n{text}", cfg.store.display());
        return Ok(());
    };
    let user = setup::require_user(&store, id)?;
    let p = store.user(&user).expect("checked");
    println!("user {user}  name {:?}  face {}", p.display_name, if p.face_embedding.is_some() { "enrolled" } else { "none" });
    for (k, v) in &p.profile_facts {
        println!("  {k}: {v}");
    }
    println!("scenes");
    for s in store.scenes_of(&user) {
        let n = match s.capture.novelty {
            Novelty::FirstScene => "first".to_string(),
            Novelty::Distance(d) => format!("{d:.3}"),
        };
        let triggers = s.capture.triggered_by.iter().map(|t| t.to_string()).collect::<Vec<_>>().join("+");
        println!(
            "  {:<10} t={:<10} e={:.3} n={:<6} {:<18} {:<22} {}",
            s.id.to_string(),
            s.timestamp,
            s.capture.salience,
            n,
            triggers,
            s.image_ref.as_deref().unwrap_or("-"),
            s.caption
        );
    }
    println!("episodes");
    for e in store.episodes_of(&user) {
        let first = e.transcript.lines().next().unwrap_or("");
        println!("  {:<10} t={:<10} {first}", e.id.to_string(), e.timestamp);
    }
    Ok(())
}
