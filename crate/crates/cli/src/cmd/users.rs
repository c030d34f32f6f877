use clap::Subcommand;

use crate::config::CliConfig;
use crate::error::Result;
use crate::setup;

#[derive(Debug, Subcommand)]
pub enum UsersCmd {
    /// List profiles (face embeddings are never shown)
    List,
    /// Permanently delete a user and all their memories
    Delete { id: String },
}

pub fn run(cfg: &CliConfig, cmd: &UsersCmd) -> Result<()> {
    let mut store = setup::open_store(cfg)?;
    match cmd {
        UsersCmd::List => {
            println!("{:<12} {:<20} {:>7} {:>9}  facts", "user", "name", "scenes", "episodes");
            for p in store.users() {
                let facts = p.profile_facts.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("; ");
                println!(
                    "{:<12} {:<20} {:>7} {:>9}  {facts}",
                    p.user_id.as_str(),
                    p.display_name,
                    store.scenes_of(&p.user_id).count(),
                    store.episodes_of(&p.user_id).count()
                );
            }
        }
        UsersCmd::Delete { id } => {
            let user = setup::require_user(&store, id)?;
            let purged = store.delete_user(&user)?;
            println!("deleted {user}: {purged} records purged");
        }
    }
    Ok(())
}
