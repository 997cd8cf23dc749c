//! Language-model gateway: prompt rendering, reply parsing, backends and the
//! per-session transcript.

mod remote;
mod replay;
mod reply;
mod scripted;
mod templates;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use remote::{RemoteBackend, RemoteConfig};
pub use replay::ReplayBackend;
pub use reply::{parse_reply, Direction, Distilled, Frame, FrameReply, Level, Reply};
pub(crate) use scripted::parameter_lines;
pub use scripted::{parse_vector_text, semantic_category, BackendRules, PlanRule, PlanVariant, ScriptedBackend};
pub use templates::{render, required_fields};

use crate::correction::Dependence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Plan,
    Replan,
    Compose,
    Recompose,
    LevelClassify,
    DependenceClassify,
    FrameResolve,
    DistillSkill,
    DistillPlan,
    RetrieveSemantic,
}

impl PromptKind {
    pub const ALL: [PromptKind; 10] = [
        PromptKind::Plan,
        PromptKind::Replan,
        PromptKind::Compose,
        PromptKind::Recompose,
        PromptKind::LevelClassify,
        PromptKind::DependenceClassify,
        PromptKind::FrameResolve,
        PromptKind::DistillSkill,
        PromptKind::DistillPlan,
        PromptKind::RetrieveSemantic,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub kind: PromptKind,
    pub fields: BTreeMap<String, String>,
}

impl PromptRequest {
    pub fn new(kind: PromptKind) -> Self {
        PromptRequest { kind, fields: BTreeMap::new() }
    }

    pub fn with(mut self, name: &str, value: impl Into<String>) -> Self {
        self.fields.insert(name.to_string(), value.into());
        self
    }

    pub fn field(&self, name: &str) -> &str {
        self.fields.get(name).map(String::as_str).unwrap_or("")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum LmError {
    #[error("{kind:?} prompt is missing field {field:?}")]
    MissingField { kind: PromptKind, field: String },
    #[error("malformed {kind:?} reply: {message}")]
    ModelFormat { kind: PromptKind, message: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("replay mismatch: {0}")]
    Replay(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

/// Verbatim HTTP bodies of one remote exchange.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wire {
    pub request: String,
    pub response: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub wire: Option<Wire>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Completion { text: text.into(), wire: None }
    }
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Produce raw reply text for a rendered prompt. Scripted backends read
    /// the structured fields; network backends send `prompt`.
    fn complete(&self, request: &PromptRequest, prompt: &str) -> Result<Completion, LmError>;

    /// Whether latencies are meaningful; deterministic backends log zero.
    fn measures_latency(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub kind: PromptKind,
    pub attempt: u32,
    pub request: PromptRequest,
    pub prompt: String,
    pub response: String,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wire: Option<Wire>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn push(&mut self, mut entry: TranscriptEntry) -> &TranscriptEntry {
        entry.seq = self.entries.last().map_or(0, |e| e.seq + 1);
        self.entries.push(entry);
        self.entries.last().expect("just pushed")
    }

    /// One JSON object per line, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        self.entries.iter().map(|e| serde_json::to_string(e).expect("transcript entries serialize") + "\n").collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let entries =
            text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect::<Result<Vec<_>, _>>()?;
        Ok(Transcript { entries })
    }
}

/// Renders, calls, parses, and logs. A reply that fails its schema is retried
/// once before surfacing `ModelFormat`.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn Backend>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("backend", &self.backend.name()).finish()
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Gateway { backend }
    }

    pub fn scripted(rules: BackendRules) -> Self {
        Gateway::new(Arc::new(ScriptedBackend::new(rules)))
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    pub fn complete(&self, request: &PromptRequest, transcript: &mut Transcript) -> Result<Reply, LmError> {
        let prompt = render(request)?;
        let mut last_error = None;
        for attempt in 0..2 {
            let started = Instant::now();
            let result = self.backend.complete(request, &prompt);
            let latency_ms = if self.backend.measures_latency() { started.elapsed().as_millis() as u64 } else { 0 };
            let completion = match result {
                Ok(c) => c,
                Err(e) => {
                    transcript.push(TranscriptEntry {
                        seq: 0,
                        kind: request.kind,
                        attempt,
                        request: request.clone(),
                        prompt: prompt.clone(),
                        response: String::new(),
                        latency_ms,
                        wire: None,
                        error: Some(e.to_string()),
                    });
                    return Err(e);
                }
            };
            let parsed = parse_reply(request.kind, &completion.text);
            transcript.push(TranscriptEntry {
                seq: 0,
                kind: request.kind,
                attempt,
                request: request.clone(),
                prompt: prompt.clone(),
                response: completion.text,
                latency_ms,
                wire: completion.wire,
                error: parsed.as_ref().err().map(ToString::to_string),
            });
            match parsed {
                Ok(reply) => return Ok(reply),
                Err(e) => {
                    tracing::debug!(kind = ?request.kind, attempt, "reply failed schema: {e}");
                    last_error = Some(e);
                }
            }
        }
        Err(last_error.expect("two attempts recorded"))
    }

    pub fn dependence(&self, correction: &str, transcript: &mut Transcript) -> Result<Dependence, LmError> {
        let req = PromptRequest::new(PromptKind::DependenceClassify).with("correction", correction);
        match self.complete(&req, transcript)? {
            Reply::Dependence(d) => Ok(d),
            other => Err(unexpected(PromptKind::DependenceClassify, &other)),
        }
    }

    pub fn level(
        &self,
        correction: &str,
        skill: &str,
        plan: &str,
        transcript: &mut Transcript,
    ) -> Result<Level, LmError> {
        let req = PromptRequest::new(PromptKind::LevelClassify)
            .with("correction", correction)
            .with("skill", skill)
            .with("plan", plan);
        match self.complete(&req, transcript)? {
            Reply::Level(l) => Ok(l),
            other => Err(unexpected(PromptKind::LevelClassify, &other)),
        }
    }
}

pub(crate) fn unexpected(kind: PromptKind, reply: &Reply) -> LmError {
    LmError::ModelFormat { kind, message: format!("unexpected reply shape {reply:?}") }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Flaky(parking_lot::Mutex<Vec<&'static str>>);

    impl Backend for Flaky {
        fn name(&self) -> &'static str {
            "flaky"
        }

        fn complete(&self, _: &PromptRequest, _: &str) -> Result<Completion, LmError> {
            Ok(Completion::text(self.0.lock().remove(0)))
        }
    }

    fn dep_request() -> PromptRequest {
        PromptRequest::new(PromptKind::DependenceClassify).with("correction", "Keep going")
    }

    #[test]
    fn retries_once_on_malformed_reply() {
        let gw = Gateway::new(Arc::new(Flaky(parking_lot::Mutex::new(vec!["not sure", "(a)"]))));
        let mut t = Transcript::default();
        assert_eq!(gw.complete(&dep_request(), &mut t).unwrap(), Reply::Dependence(Dependence::Last));
        assert_eq!(t.entries.len(), 2);
        assert_eq!(t.entries.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![0, 1]);
        assert!(t.entries[0].error.is_some());
    }

    #[test]
    fn second_malformed_reply_is_an_error() {
        let gw = Gateway::new(Arc::new(Flaky(parking_lot::Mutex::new(vec!["maybe (a) or (b)", "(a) or (c)"]))));
        let mut t = Transcript::default();
        assert!(matches!(gw.complete(&dep_request(), &mut t), Err(LmError::ModelFormat { .. })));
        assert_eq!(t.entries.len(), 2);
    }

    #[test]
    fn transcript_jsonl_round_trip() {
        let gw = Gateway::scripted(BackendRules::default());
        let mut t = Transcript::default();
        gw.complete(&dep_request(), &mut t).unwrap();
        gw.dependence("Now you can continue", &mut t).unwrap();
        let text = t.to_jsonl();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(Transcript::from_jsonl(&text).unwrap(), t);
    }
}
