pub mod bench;
pub mod capture;
pub mod eval;
pub mod inspect;
pub mod query;
pub mod users;

use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, Result};

/// Writes `name` under `dir`, creating the directory.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Failed(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
    write_file(dir, name, &(text + "\n"))
}

pub enum Speaker {
    Known { user: selmem_core::UserId, created: bool },
    Clarify { candidate: selmem_core::UserId, name_ratio: f64 },
    /// No name given yet; memory stays off.
    Anonymous,
}

/// `--user` must name an existing profile; `--name` runs identification and
/// may create a profile dated `today`.
pub fn resolve_speaker(
    store: &mut selmem_core::Store,
    user: Option<&str>,
    name: Option<&str>,
    today: chrono::NaiveDate,
) -> Result<Speaker> {
    use selmem_core::{identify_user, IdentityDecision};
    if let Some(id) = user {
        return Ok(Speaker::Known { user: crate::setup::require_user(store, id)?, created: false });
    }
    let Some(name) = name.filter(|n| !n.trim().is_empty()) else {
        return Ok(Speaker::Anonymous);
    };
    Ok(match identify_user(Some(name), None, store, today)? {
        IdentityDecision::Identified { user_id, .. } => Speaker::Known { user: user_id, created: false },
        IdentityDecision::NewUser { user_id } => Speaker::Known { user: user_id, created: true },
        IdentityDecision::NeedsClarification { candidate, name_ratio } => Speaker::Clarify { candidate, name_ratio },
    })
}
