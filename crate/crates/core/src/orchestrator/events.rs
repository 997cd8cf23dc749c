use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    State,
    Plan,
    Step,
    Prompt,
    Correction,
    Solution,
    Distilled,
    Done,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventEnvelope {
    pub seq: u64,
    #[serde(rename = "type")]
    pub kind: EventType,
    pub payload: Value,
}

/// Append-only, gap-free event log of one session.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    events: Vec<EventEnvelope>,
}

impl EventLog {
    pub fn push(&mut self, kind: EventType, payload: impl Serialize) -> u64 {
        let seq = self.events.len() as u64;
        let payload = serde_json::to_value(payload).unwrap_or_else(|e| Value::String(e.to_string()));
        self.events.push(EventEnvelope { seq, kind, payload });
        seq
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn since(&self, from: u64) -> &[EventEnvelope] {
        let from = (from as usize).min(self.events.len());
        &self.events[from..]
    }

    pub fn all(&self) -> &[EventEnvelope] {
        &self.events
    }
}
