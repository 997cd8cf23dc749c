//! Session state machine, scripted user, episode driver and benchmark runner.

mod ablation;
mod benchmark;
mod episode;
mod events;
mod metrics;
mod session;
mod user;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ablation::Ablation;
pub use benchmark::{run_benchmark, BenchmarkConfig, BenchmarkReport, CellReport, TableRow};
pub use episode::{run_episode, EpisodeLimits, EpisodeReport};
pub use events::{EventEnvelope, EventLog, EventType};
pub use metrics::{amortized, Fraction};
pub use session::{
    CorrectionReport, Session, SessionMetrics, SessionSetup, SessionState, SkillRecord, Snapshot, StepReport, UserMode,
};
pub use user::ScriptedUser;

use crate::knowledge::KnowledgeError;
use crate::scenario::ScenarioError;

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "message")]
pub enum OrchestratorError {
    #[error("empty input")]
    EmptyInput,
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("no ground truth for {0}")]
    MissingGroundTruth(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("knowledge: {0}")]
    Knowledge(String),
}

impl From<ScenarioError> for OrchestratorError {
    fn from(e: ScenarioError) -> Self {
        OrchestratorError::Scenario(e.to_string())
    }
}

impl From<KnowledgeError> for OrchestratorError {
    fn from(e: KnowledgeError) -> Self {
        OrchestratorError::Knowledge(e.to_string())
    }
}
