//! Selective multimodal memory for conversational agents.
//!
//! Frames are gated into a per-user store by emotional salience and scene
//! novelty; queries are answered by a hybrid episode/scene search whose two
//! score pools are z-score normalized before comparison. The `eval` module
//! carries the offline evaluation harness (rank correlation, nested CV,
//! Recall@K fusion sweeps).

pub mod capture;
pub mod encoders;
pub mod eval;
pub mod identity;
pub mod novelty;
pub mod retrieval;
pub mod rng;
pub mod salience;
pub mod store;
pub mod vector;

pub use capture::{
    capture_frame, decide_memorable, mem_score, novelty_channel, CaptureConfig, CaptureDecision, CaptureError,
    CaptureOutcome, CaptureWeights, FrameInput, Trigger,
};
pub use identity::{
    classify_intent, extract_profile_facts, identify_user, levenshtein_ratio, IdentityDecision, IdentityError, Intent,
    IntentClassifier, MatchedBy, RuleBasedClassifier,
};
pub use novelty::{burnin_novelty, novelty_score, BurninConfig, Novelty, NoveltyConfig, NoveltyError};
pub use retrieval::{
    fuse_scores, hybrid_retrieve, scene_similarity, Hit, Modality, RetrievalConfig, RetrievalError, RetrievalResult,
};
pub use salience::{
    emotion_salience, frame_salience, Emotion, EmotionThresholds, EmotionVector, SalienceError,
};
pub use store::{
    EpisodeId, EpisodeMemory, NewEpisode, NewScene, SceneId, SceneMemory, Store, StoreError, UserId, UserProfile,
};
pub use vector::{cosine_distance, cosine_similarity, zscore_normalize, Embedding, Timestamp, VectorError};
