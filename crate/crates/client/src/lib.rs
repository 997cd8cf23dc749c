//! Async client for the session service.

use futures::{Stream, StreamExt};
use lessons_core::knowledge::KnowledgeEntry;
use lessons_core::orchestrator::{
    Ablation, BenchmarkReport, CorrectionReport, EpisodeReport, EventEnvelope, SessionState, Snapshot, StepReport,
    UserMode,
};
use lessons_core::planner::Plan;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    #[error("{status} {error}: {message}")]
    Api { status: u16, error: String, message: String },
    #[error("malformed event: {0}")]
    Event(String),
    #[error("bad url: {0}")]
    Url(String),
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            ClientError::Http(e) => e.status().map(|s| s.as_u16()),
            ClientError::Event(_) | ClientError::Url(_) => None,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct NewSession {
    pub scenario_id: String,
    pub ablation: Ablation,
    pub user_mode: UserMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iteration: Option<u32>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub instruction: String,
}

#[derive(Clone, Debug, Deserialize)]
pub struct Planned {
    pub state: SessionState,
    pub plan: Option<Plan>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct Approved {
    pub state: SessionState,
    pub distilled: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
struct StateOnly {
    state: SessionState,
}

#[derive(Clone, Debug, Deserialize)]
pub struct KbListing {
    pub dim: usize,
    pub entries: Vec<KnowledgeEntry>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct ScenarioSummary {
    pub id: String,
    pub kind: lessons_core::scenario::ScenarioKind,
    pub description: String,
    pub tasks: Vec<String>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BenchmarkParams {
    pub suite: Vec<String>,
    pub ablations: Vec<Ablation>,
    pub iterations: Option<u32>,
    pub seed: Option<u64>,
    pub parallel: usize,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
    message: String,
}

#[derive(Clone, Debug)]
pub struct Client {
    base: String,
    http: reqwest::Client,
    token: Option<String>,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        Client { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new(), token: None }
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn request(&self, method: reqwest::Method, path: &str) -> reqwest::RequestBuilder {
        let r = self.http.request(method, self.url(path));
        match &self.token {
            Some(t) => r.bearer_auth(t),
            None => r,
        }
    }

    async fn check(resp: reqwest::Response) -> Result<reqwest::Response, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().await.unwrap_or_default();
        let (error, message) = match serde_json::from_str::<ErrorBody>(&text) {
            Ok(b) => (b.error, b.message),
            Err(_) => ("http".to_string(), text),
        };
        Err(ClientError::Api { status: status.as_u16(), error, message })
    }

    async fn send<T: DeserializeOwned>(&self, req: reqwest::RequestBuilder) -> Result<T, ClientError> {
        Ok(Self::check(req.send().await?).await?.json().await?)
    }

    async fn post<T: DeserializeOwned>(&self, path: &str, body: &impl Serialize) -> Result<T, ClientError> {
        self.send(self.request(reqwest::Method::POST, path).json(body)).await
    }

    async fn post_empty<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        self.send(self.request(reqwest::Method::POST, path)).await
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        self.send(self.request(reqwest::Method::GET, path)).await
    }

    pub async fn scenarios(&self) -> Result<Vec<ScenarioSummary>, ClientError> {
        self.get("/scenarios").await
    }

    pub async fn create_session(&self, new: &NewSession) -> Result<Created, ClientError> {
        self.post("/sessions", new).await
    }

    pub async fn instruction(&self, id: &str, text: &str) -> Result<Planned, ClientError> {
        self.post(&format!("/sessions/{id}/instruction"), &serde_json::json!({ "text": text })).await
    }

    pub async fn step(&self, id: &str) -> Result<StepReport, ClientError> {
        self.post_empty(&format!("/sessions/{id}/step")).await
    }

    pub async fn interrupt(&self, id: &str) -> Result<SessionState, ClientError> {
        self.post_empty::<StateOnly>(&format!("/sessions/{id}/interrupt")).await.map(|s| s.state)
    }

    pub async fn correction(&self, id: &str, text: &str) -> Result<CorrectionReport, ClientError> {
        self.post(&format!("/sessions/{id}/correction"), &serde_json::json!({ "text": text })).await
    }

    pub async fn approve(&self, id: &str) -> Result<Approved, ClientError> {
        self.post_empty(&format!("/sessions/{id}/approve")).await
    }

    pub async fn run_scripted(&self, id: &str) -> Result<EpisodeReport, ClientError> {
        self.post_empty(&format!("/sessions/{id}/run")).await
    }

    pub async fn state(&self, id: &str) -> Result<Snapshot, ClientError> {
        self.get(&format!("/sessions/{id}/state")).await
    }

    pub async fn kb(&self) -> Result<KbListing, ClientError> {
        self.get("/kb").await
    }

    fn kb_url(&self, key: &str) -> Result<reqwest::Url, ClientError> {
        let mut url = reqwest::Url::parse(&self.url("/kb")).map_err(|e| ClientError::Url(e.to_string()))?;
        url.path_segments_mut().map_err(|_| ClientError::Url(self.base.clone()))?.extend(key.split('/'));
        Ok(url)
    }

    fn kb_request(&self, method: reqwest::Method, key: &str) -> Result<reqwest::RequestBuilder, ClientError> {
        let r = self.http.request(method, self.kb_url(key)?);
        Ok(match &self.token {
            Some(t) => r.bearer_auth(t),
            None => r,
        })
    }

    pub async fn kb_entry(&self, key: &str) -> Result<KnowledgeEntry, ClientError> {
        self.send(self.kb_request(reqwest::Method::GET, key)?).await
    }

    pub async fn kb_delete(&self, key: &str) -> Result<(), ClientError> {
        Self::check(self.kb_request(reqwest::Method::DELETE, key)?.send().await?).await?;
        Ok(())
    }

    pub async fn benchmark(&self, params: &BenchmarkParams) -> Result<BenchmarkReport, ClientError> {
        self.post("/benchmark", params).await
    }

    /// Event stream from `from`; ends when the session is done.
    pub async fn events(
        &self,
        id: &str,
        from: u64,
    ) -> Result<impl Stream<Item = Result<EventEnvelope, ClientError>>, ClientError> {
        let resp = Self::check(
            self.request(reqwest::Method::GET, &format!("/sessions/{id}/events?from={from}")).send().await?,
        )
        .await?;
        let bytes = resp.bytes_stream();
        let init = (bytes, String::new(), std::collections::VecDeque::<Result<EventEnvelope, ClientError>>::new());
        Ok(futures::stream::unfold(init, |(mut bytes, mut buf, mut ready)| async move {
            loop {
                if let Some(item) = ready.pop_front() {
                    return Some((item, (bytes, buf, ready)));
                }
                match bytes.next().await {
                    Some(Ok(chunk)) => {
                        buf.push_str(&String::from_utf8_lossy(&chunk));
                        while let Some(end) = buf.find("\n\n") {
                            let frame: String = buf.drain(..end + 2).collect();
                            if let Some(item) = parse_frame(&frame) {
                                ready.push_back(item);
                            }
                        }
                    }
                    Some(Err(e)) => return Some((Err(e.into()), (bytes, buf, ready))),
                    None => return None,
                }
            }
        }))
    }
}

/// One SSE frame to an envelope; comments and keep-alives yield `None`.
fn parse_frame(frame: &str) -> Option<Result<EventEnvelope, ClientError>> {
    let data: Vec<&str> =
        frame.lines().filter_map(|l| l.strip_prefix("data:").map(|d| d.strip_prefix(' ').unwrap_or(d))).collect();
    if data.is_empty() {
        return None;
    }
    let text = data.join("\n");
    Some(serde_json::from_str(&text).map_err(|e| ClientError::Event(format!("{e}: {text}"))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames() {
        assert!(parse_frame(": keep-alive\n\n").is_none());
        let e = parse_frame("id: 3\nevent: state\ndata: {\"seq\":3,\"type\":\"state\",\"payload\":{}}\n\n")
            .unwrap()
            .unwrap();
        assert_eq!(e.seq, 3);
        assert!(parse_frame("data: nope\n\n").unwrap().is_err());
    }

    #[test]
    fn keys_are_percent_encoded() {
        let c = Client::new("http://localhost:1/");
        assert_eq!(
            c.kb_url("skill/open the top drawer").unwrap().as_str(),
            "http://localhost:1/kb/skill/open%20the%20top%20drawer"
        );
    }
}
