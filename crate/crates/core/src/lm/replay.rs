use std::collections::VecDeque;

use parking_lot::Mutex;

use super::{Backend, Completion, LmError, PromptRequest, Transcript};

/// Serves recorded responses in order, checking each request against the log.
pub struct ReplayBackend {
    queue: Mutex<VecDeque<(PromptRequest, String)>>,
}

impl ReplayBackend {
    pub fn new(transcript: &Transcript) -> Self {
        let queue = transcript.entries.iter().map(|e| (e.request.clone(), e.response.clone())).collect();
        ReplayBackend { queue: Mutex::new(queue) }
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().len()
    }
}

impl Backend for ReplayBackend {
    fn name(&self) -> &'static str {
        "replay"
    }

    fn complete(&self, request: &PromptRequest, _prompt: &str) -> Result<Completion, LmError> {
        let mut queue = self.queue.lock();
        let Some((expected, response)) = queue.pop_front() else {
            return Err(LmError::Replay(format!("transcript exhausted at {:?}", request.kind)));
        };
        if &expected != request {
            return Err(LmError::Replay(format!("expected {:?} request, got {:?}", expected.kind, request.kind)));
        }
        Ok(Completion::text(response))
    }
}
