//! Knowledge base, distillation and two-stage retrieval.

mod distill;
mod embed;
mod retrieve;
mod store;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composer::ParamValue;
use crate::lm::LmError;
use crate::sim::SimError;
use crate::skill::normalize;

pub use distill::{distill_plan, distill_skill, parse_state_updates, PlanDistillInput, SkillDistillInput};
pub use embed::{cosine, Embedder, HashEmbedder};
pub use retrieve::{brute_force_argmax, Retrieval, RetrieveConfig, Retriever};
pub use store::{KnowledgeBase, SharedKb, HEADER_PREFIX};

/// Default feature dimension.
pub const DEFAULT_DIM: usize = 16;
/// Minimum visual similarity for a specific entry to be returned.
pub const VISUAL_THRESHOLD: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeKind {
    PlanLevel,
    SkillLevel,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    Task,
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectInfo {
    pub label: String,
    #[serde(default)]
    pub feature: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub session: String,
    pub iteration: u32,
    pub sequence: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeEntry {
    pub key: String,
    pub kind: KnowledgeKind,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default)]
    pub constraints: Vec<String>,
    #[serde(default)]
    pub preferences: Vec<String>,
    #[serde(default)]
    pub task_params: BTreeMap<String, ParamValue>,
    #[serde(default)]
    pub object_info: Option<ObjectInfo>,
    #[serde(default)]
    pub object_state_updates: BTreeMap<String, String>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl KnowledgeEntry {
    pub fn new(key: &str, kind: KnowledgeKind) -> Self {
        KnowledgeEntry {
            key: key.trim().to_string(),
            kind,
            scope: Scope::Task,
            constraints: Vec::new(),
            preferences: Vec::new(),
            task_params: BTreeMap::new(),
            object_info: None,
            object_state_updates: BTreeMap::new(),
            provenance: Provenance::default(),
        }
    }

    /// Storage id: kind or scope prefix plus the normalized key.
    pub fn id(&self) -> String {
        entry_id(self.kind, self.scope, &self.key)
    }

    pub fn validate(&self) -> Result<(), KnowledgeError> {
        let bad = |m: &str| Err(KnowledgeError::InvalidEntry(format!("{}: {m}", self.key)));
        if normalize(&self.key).is_empty() {
            return bad("empty key");
        }
        match self.kind {
            KnowledgeKind::PlanLevel if !self.task_params.is_empty() => bad("plan-level entry with task parameters"),
            KnowledgeKind::SkillLevel if !self.constraints.is_empty() => bad("skill-level entry with constraints"),
            KnowledgeKind::SkillLevel if self.scope == Scope::Global => bad("skill-level entry cannot be global"),
            _ => Ok(()),
        }
    }

    pub fn feature(&self) -> Option<&[f64]> {
        self.object_info.as_ref().map(|o| o.feature.as_slice()).filter(|f| !f.is_empty())
    }

    /// Plain-text rendering injected into plan prompts.
    pub fn render(&self) -> String {
        let mut lines = Vec::new();
        for c in &self.constraints {
            lines.push(format!("Constraint: {c}"));
        }
        for p in &self.preferences {
            lines.push(format!("Preference: {p}"));
        }
        for (k, v) in &self.task_params {
            lines.push(format!("{k} = {}", v.render()));
        }
        for (o, s) in &self.object_state_updates {
            lines.push(format!("{o}({s})"));
        }
        lines.join("\n")
    }
}

pub fn entry_id(kind: KnowledgeKind, scope: Scope, key: &str) -> String {
    let prefix = match (scope, kind) {
        (Scope::Global, _) => "global",
        (Scope::Task, KnowledgeKind::PlanLevel) => "plan",
        (Scope::Task, KnowledgeKind::SkillLevel) => "skill",
    };
    format!("{prefix}/{}", normalize(key))
}

/// Knowledge that applies to every task.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalKnowledge {
    pub robot_constraints: Vec<String>,
    pub user_preferences: Vec<String>,
}

impl GlobalKnowledge {
    pub fn is_empty(&self) -> bool {
        self.robot_constraints.is_empty() && self.user_preferences.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum KnowledgeError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("corrupt knowledge base file: {0}")]
    CorruptFile(String),
    #[error("invalid entry: {0}")]
    InvalidEntry(String),
    #[error("feature has dimension {found}, knowledge base uses {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("cosine of a zero vector")]
    ZeroVector,
    #[error("skill {0:?} is not fulfilled")]
    NotFulfilled(String),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
