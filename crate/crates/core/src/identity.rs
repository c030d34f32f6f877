//! User identification and utterance intent routing.
//!
//! Names are matched with a normalized Levenshtein ratio, faces with cosine
//! similarity against every stored face embedding. Utterances are routed to
//! one of three intents by a pluggable classifier; the default one matches
//! configurable regular expressions.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{Store, StoreError, UserId};
use crate::vector::{cosine_similarity, Embedding, VectorError};

/// Name ratios strictly above this confirm identity.
pub const NAME_CONFIRM: f64 = 0.8;
/// Name ratios in `[NAME_CLARIFY, NAME_CONFIRM]` ask for clarification.
pub const NAME_CLARIFY: f64 = 0.6;
/// Face cosine similarity at or above this is a match.
pub const FACE_MATCH: f64 = 0.5;

#[derive(Debug, Error)]
pub enum IdentityError {
    #[error("identification needs a name or a face embedding")]
    NoEvidence,
    #[error(transparent)]
    Storage(#[from] StoreError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("invalid intent patterns: {0}")]
    Patterns(String),
}

/// `(|a| + |b| - d) / (|a| + |b|)` with `d` the unit-cost edit distance over
/// trimmed, lowercased characters. Two empty strings score 1.
pub fn levenshtein_ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.trim().to_lowercase().chars().collect();
    let b: Vec<char> = b.trim().to_lowercase().chars().collect();
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    let d = edit_distance(&a, &b);
    (total - d) as f64 / total as f64
}

fn edit_distance(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NameRegion {
    Confirmed,
    Clarify,
    Unknown,
}

pub fn classify_name_ratio(ratio: f64) -> NameRegion {
    if ratio > NAME_CONFIRM {
        NameRegion::Confirmed
    } else if ratio >= NAME_CLARIFY {
        NameRegion::Clarify
    } else {
        NameRegion::Unknown
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchedBy {
    Name,
    Face,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum IdentityDecision {
    Identified { user_id: UserId, matched_by: MatchedBy },
    NeedsClarification { candidate: UserId, name_ratio: f64 },
    NewUser { user_id: UserId },
}

impl IdentityDecision {
    pub fn user_id(&self) -> &UserId {
        match self {
            IdentityDecision::Identified { user_id, .. } | IdentityDecision::NewUser { user_id } => user_id,
            IdentityDecision::NeedsClarification { candidate, .. } => candidate,
        }
    }
}

/// Best `(score, user)` over profiles; ties keep the smallest user id.
fn best_by<F>(store: &Store, mut score: F) -> Result<Option<(f64, UserId)>, IdentityError>
where
    F: FnMut(&crate::store::UserProfile) -> Result<Option<f64>, IdentityError>,
{
    let mut best: Option<(f64, UserId)> = None;
    for p in store.users() {
        if let Some(s) = score(p)? {
            let better = match &best {
                None => true,
                Some((b, id)) => s > *b || (s == *b && p.user_id < *id),
            };
            if better {
                best = Some((s, p.user_id.clone()));
            }
        }
    }
    Ok(best)
}

/// Identifies the speaker, creating a fresh profile dated `today` when
/// neither signal matches. A face match outranks a conflicting name match.
pub fn identify_user(
    name: Option<&str>,
    face: Option<&Embedding>,
    store: &mut Store,
    today: NaiveDate,
) -> Result<IdentityDecision, IdentityError> {
    let name = name.map(str::trim).filter(|n| !n.is_empty());
    if name.is_none() && face.is_none() {
        return Err(IdentityError::NoEvidence);
    }

    let by_name = match name {
        Some(n) => best_by(store, |p| {
            Ok((!p.display_name.is_empty()).then(|| levenshtein_ratio(n, &p.display_name)))
        })?,
        None => None,
    };
    let by_face = match face {
        Some(f) => best_by(store, |p| match &p.face_embedding {
            Some(stored) => Ok(Some(cosine_similarity(f, stored)?)),
            None => Ok(None),
        })?
        .filter(|(s, _)| *s >= FACE_MATCH),
        None => None,
    };

    let name_region = by_name.as_ref().map(|(r, _)| classify_name_ratio(*r));
    if let Some((_, face_user)) = by_face {
        let matched_by = match (&by_name, name_region) {
            (Some((_, name_user)), Some(NameRegion::Confirmed)) if *name_user == face_user => MatchedBy::Both,
            _ => MatchedBy::Face,
        };
        return Ok(IdentityDecision::Identified { user_id: face_user, matched_by });
    }
    match (by_name, name_region) {
        (Some((_, user_id)), Some(NameRegion::Confirmed)) => {
            Ok(IdentityDecision::Identified { user_id, matched_by: MatchedBy::Name })
        }
        (Some((name_ratio, candidate)), Some(NameRegion::Clarify)) => {
            Ok(IdentityDecision::NeedsClarification { candidate, name_ratio })
        }
        _ => {
            let user_id = store.create_user(name.unwrap_or(""), face.cloned(), today)?;
            Ok(IdentityDecision::NewUser { user_id })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    ProfileUpdate,
    SessionEnd,
    Continue,
}

pub trait IntentClassifier: Send + Sync {
    fn classify(&self, utterance: &str) -> Result<Intent, String>;
}

/// Pattern lists for [`RuleBasedClassifier`], loadable from TOML:
///
/// ```toml
/// profile_update = ['\bmy name is\b', '\bi live in\b']
/// session_end = ['\bgood ?bye\b']
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntentPatterns {
    #[serde(default)]
    pub profile_update: Vec<String>,
    #[serde(default)]
    pub session_end: Vec<String>,
}

impl Default for IntentPatterns {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            profile_update: v(&[
                r"\bmy name is\b",
                r"\bcall me\b",
                r"\bi live in\b",
                r"\bi'?m from\b",
                r"\bi work (as|at|in)\b",
                r"\bmy (job|hobby|hobbies|favou?rite)\b",
            ]),
            session_end: v(&[
                r"\b(good ?bye|bye|farewell|good ?night)\b",
                r"\bsee you\b",
                r"\bthat'?s all for (now|today)\b",
                r"\bend (the )?session\b",
            ]),
        }
    }
}

impl IntentPatterns {
    pub fn from_toml(text: &str) -> Result<Self, IdentityError> {
        toml::from_str(text).map_err(|e| IdentityError::Patterns(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, IdentityError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| IdentityError::Patterns(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Case-insensitive pattern matcher. Farewell patterns are checked first.
#[derive(Debug, Clone)]
pub struct RuleBasedClassifier {
    profile_update: Vec<Regex>,
    session_end: Vec<Regex>,
}

impl RuleBasedClassifier {
    pub fn new(patterns: &IntentPatterns) -> Result<Self, IdentityError> {
        let compile = |xs: &[String]| -> Result<Vec<Regex>, IdentityError> {
            xs.iter()
                .map(|p| {
                    RegexBuilder::new(p)
                        .case_insensitive(true)
                        .build()
                        .map_err(|e| IdentityError::Patterns(format!("{p:?}: {e}")))
                })
                .collect()
        };
        Ok(Self {
            profile_update: compile(&patterns.profile_update)?,
            session_end: compile(&patterns.session_end)?,
        })
    }
}

impl Default for RuleBasedClassifier {
    fn default() -> Self {
        Self::new(&IntentPatterns::default()).expect("built-in patterns compile")
    }
}

impl IntentClassifier for RuleBasedClassifier {
    fn classify(&self, utterance: &str) -> Result<Intent, String> {
        if self.session_end.iter().any(|r| r.is_match(utterance)) {
            Ok(Intent::SessionEnd)
        } else if self.profile_update.iter().any(|r| r.is_match(utterance)) {
            Ok(Intent::ProfileUpdate)
        } else {
            Ok(Intent::Continue)
        }
    }
}

/// Routes an utterance. Classifier failures and blank input map to
/// `Continue`, which never mutates memory.
pub fn classify_intent(utterance: &str, classifier: &dyn IntentClassifier) -> Intent {
    if utterance.trim().is_empty() {
        return Intent::Continue;
    }
    classifier.classify(utterance).unwrap_or(Intent::Continue)
}

fn fact_patterns() -> &'static [(&'static str, Regex)] {
    static PATTERNS: std::sync::OnceLock<Vec<(&'static str, Regex)>> = std::sync::OnceLock::new();
    PATTERNS.get_or_init(|| {
        let stop = r"([^.,;!?]+?)(?:\s+and\s+|[.,;!?]|$)";
        [
            ("name", r"(?:my name is|call me)\s+(\p{L}[\p{L}'\-]*)".to_string()),
            ("city", format!(r"(?:i live in|i'?m from|i am from)\s+{stop}")),
            ("occupation", format!(r"(?:i work as an?|i'?m an?|i am an?)\s+{stop}")),
            ("interests", format!(r"(?:i (?:really )?(?:like|love|enjoy)|my hobby is|my hobbies are)\s+{stop}")),
        ]
        .into_iter()
        .map(|(k, p)| (k, RegexBuilder::new(&p).case_insensitive(true).build().expect("valid fact pattern")))
        .collect()
    })
}

/// Extracts `name`, `city`, `occupation` and `interests` facts from a
/// self-introduction. Later mentions of the same key win.
pub fn extract_profile_facts(utterance: &str) -> BTreeMap<String, String> {
    let mut facts = BTreeMap::new();
    for (key, re) in fact_patterns() {
        for caps in re.captures_iter(utterance) {
            let value = caps[1].trim();
            if !value.is_empty() {
                facts.insert(key.to_string(), value.to_string());
            }
        }
    }
    facts
}
