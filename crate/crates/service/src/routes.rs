use std::collections::VecDeque;
use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use lessons_core::correction::Author;
use lessons_core::knowledge::KnowledgeEntry;
use lessons_core::orchestrator::{
    run_benchmark, run_episode, Ablation, BenchmarkConfig, BenchmarkReport, CorrectionReport, EpisodeLimits,
    EpisodeReport, EventEnvelope, ScriptedUser, Session, SessionSetup, SessionState, Snapshot, StepReport, UserMode,
};
use lessons_core::planner::Plan;
use lessons_core::scenario::ScenarioKind;
use serde::{Deserialize, Serialize};

use crate::state::SessionSlot;
use crate::{ApiError, AppState};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub scenario_id: String,
    #[serde(default)]
    pub ablation: Ablation,
    #[serde(default)]
    pub user_mode: UserMode,
    /// Task name; the scenario's first task when absent.
    #[serde(default)]
    pub task: Option<String>,
    #[serde(default)]
    pub iteration: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
    pub instruction: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstructionRequest {
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextRequest {
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstructionResponse {
    pub state: SessionState,
    pub plan: Option<Plan>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateResponse {
    pub state: SessionState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproveResponse {
    pub state: SessionState,
    pub distilled: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KbListing {
    pub dim: usize,
    pub entries: Vec<KnowledgeEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub id: String,
    pub kind: ScenarioKind,
    pub description: String,
    pub tasks: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRequest {
    /// Scenario ids; every loaded scenario when empty.
    #[serde(default)]
    pub suite: Vec<String>,
    #[serde(default)]
    pub ablations: Vec<Ablation>,
    #[serde(default)]
    pub iterations: Option<u32>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub parallel: usize,
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    #[serde(default)]
    from: u64,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scenarios", get(list_scenarios))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/instruction", post(instruction))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/interrupt", post(interrupt))
        .route("/sessions/{id}/correction", post(correction))
        .route("/sessions/{id}/approve", post(approve))
        .route("/sessions/{id}/run", post(run_scripted))
        .route("/sessions/{id}/state", get(snapshot))
        .route("/sessions/{id}/events", get(events))
        .route("/kb", get(kb_list))
        .route("/kb/{*key}", get(kb_get).delete(kb_delete))
        .route("/benchmark", post(benchmark))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

async fn require_token(State(state): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.inner.token {
        let ok = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|v| v == token);
        if !ok {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token")
                .into_response();
        }
    }
    next.run(request).await
}

/// Run `op` on the session off the async executor, then publish its events.
async fn with_session<T, F>(state: &AppState, id: &str, op: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut Session) -> Result<T, ApiError> + Send + 'static,
{
    let slot = state.slot(id)?;
    tokio::task::spawn_blocking(move || {
        let mut session = slot.session.lock();
        let out = op(&mut session);
        slot.publish(&session);
        out
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn list_scenarios(State(state): State<AppState>) -> Json<Vec<ScenarioSummary>> {
    Json(
        state
            .inner
            .scenarios
            .values()
            .map(|s| ScenarioSummary {
                id: s.id.clone(),
                kind: s.kind,
                description: s.description.clone(),
                tasks: s.tasks.iter().map(|t| t.name.clone()).collect(),
            })
            .collect(),
    )
}

async fn create_session(
    State(state): State<AppState>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<CreatedSession>), ApiError> {
    let scenario = state.scenario(&req.scenario_id)?;
    let task = match &req.task {
        Some(name) => scenario.task(name).cloned().ok_or_else(|| ApiError::not_found(format!("task {name:?}")))?,
        None => scenario.tasks[0].clone(),
    };
    let dim = state.inner.kb.read().dim();
    if let Some(d) = scenario.feature_dim().filter(|d| *d != dim) {
        return Err(ApiError::bad_request(format!("scenario features have dim {d}, knowledge base has {dim}")));
    }
    let id = uuid::Uuid::new_v4().to_string();
    let instruction = task.instruction.clone();
    let session = Session::new(SessionSetup {
        id: id.clone(),
        gateway: state.gateway_for(&scenario),
        scenario,
        task,
        iteration: req.iteration.unwrap_or(1).max(1),
        ablation: req.ablation,
        user_mode: req.user_mode,
        kb: state.inner.kb.clone(),
        embedder: state.inner.embedder.clone(),
        plan_archive: String::new(),
        threshold: state.threshold(),
    })?;
    state.inner.sessions.write().insert(id.clone(), Arc::new(SessionSlot::new(session)));
    Ok((StatusCode::CREATED, Json(CreatedSession { session_id: id, instruction })))
}

async fn instruction(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<InstructionRequest>,
) -> Result<Json<InstructionResponse>, ApiError> {
    with_session(&state, &id, move |s| {
        s.instruction(&req.text)?;
        Ok(InstructionResponse { state: s.state().clone(), plan: s.plan().cloned() })
    })
    .await
    .map(Json)
}

async fn step(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<StepReport>, ApiError> {
    with_session(&state, &id, |s| Ok(s.step()?)).await.map(Json)
}

async fn interrupt(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<StateResponse>, ApiError> {
    with_session(&state, &id, |s| Ok(StateResponse { state: s.interrupt()? })).await.map(Json)
}

async fn correction(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<TextRequest>,
) -> Result<Json<CorrectionReport>, ApiError> {
    with_session(&state, &id, move |s| Ok(s.correct(&req.text, Author::Human)?)).await.map(Json)
}

async fn approve(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<ApproveResponse>, ApiError> {
    let out = with_session(&state, &id, |s| {
        let before = s.metrics().distilled.len();
        let state = s.approve()?;
        Ok(ApproveResponse { state, distilled: s.metrics().distilled[before..].to_vec() })
    })
    .await?;
    if !out.distilled.is_empty() {
        state.save_kb()?;
    }
    Ok(Json(out))
}

async fn run_scripted(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<EpisodeReport>, ApiError> {
    let report = with_session(&state, &id, |s| {
        if s.setup().user_mode != UserMode::Scripted {
            return Err(ApiError::new(StatusCode::CONFLICT, "conflict", "session is driven by a human user"));
        }
        Ok(run_episode(s, &mut ScriptedUser::new(), EpisodeLimits::default())?)
    })
    .await?;
    if !report.distilled.is_empty() {
        state.save_kb()?;
    }
    Ok(Json(report))
}

async fn snapshot(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Snapshot>, ApiError> {
    with_session(&state, &id, |s| Ok(s.snapshot())).await.map(Json)
}

struct StreamState {
    slot: Arc<SessionSlot>,
    next: u64,
    pending: VecDeque<EventEnvelope>,
    rx: tokio::sync::watch::Receiver<u64>,
}

fn sse_event(e: &EventEnvelope) -> Event {
    let kind = serde_json::to_value(e.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    Event::default().id(e.seq.to_string()).event(kind).data(serde_json::to_string(e).unwrap_or_default())
}

/// Replays the log from `from`, then follows it live. The stream ends once
/// the session is done and everything has been sent.
fn event_stream(slot: Arc<SessionSlot>, from: u64) -> impl Stream<Item = Result<Event, Infallible>> {
    let rx = slot.notify.subscribe();
    let init = StreamState { slot, next: from, pending: VecDeque::new(), rx };
    futures::stream::unfold(init, |mut st| async move {
        loop {
            if let Some(e) = st.pending.pop_front() {
                let ev = sse_event(&e);
                return Some((Ok(ev), st));
            }
            st.rx.borrow_and_update();
            let done;
            {
                let events = st.slot.events.read();
                let new = &events[(st.next as usize).min(events.len())..];
                st.next += new.len() as u64;
                st.pending.extend(new.iter().cloned());
                done = events.last().is_some_and(|e| e.kind == lessons_core::orchestrator::EventType::Done);
            }
            if !st.pending.is_empty() {
                continue;
            }
            if done || st.rx.changed().await.is_err() {
                return None;
            }
        }
    })
}

async fn events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let slot = state.slot(&id)?;
    Ok(Sse::new(event_stream(slot, q.from)).keep_alive(KeepAlive::new().interval(Duration::from_secs(15))))
}

async fn kb_list(State(state): State<AppState>) -> Json<KbListing> {
    let kb = state.inner.kb.read();
    Json(KbListing { dim: kb.dim(), entries: kb.list().into_iter().cloned().collect() })
}

async fn kb_get(State(state): State<AppState>, Path(key): Path<String>) -> Result<Json<KnowledgeEntry>, ApiError> {
    state.inner.kb.read().get(&key).cloned().map(Json).ok_or_else(|| ApiError::not_found(format!("entry {key:?}")))
}

async fn kb_delete(State(state): State<AppState>, Path(key): Path<String>) -> Result<StatusCode, ApiError> {
    let removed = state.inner.kb.write().delete(&key);
    match removed {
        Some(_) => {
            state.save_kb()?;
            Ok(StatusCode::NO_CONTENT)
        }
        None => Err(ApiError::not_found(format!("entry {key:?}"))),
    }
}

async fn benchmark(
    State(state): State<AppState>,
    Json(req): Json<BenchmarkRequest>,
) -> Result<Json<BenchmarkReport>, ApiError> {
    let suite = if req.suite.is_empty() {
        state.inner.scenarios.values().cloned().collect::<Vec<_>>()
    } else {
        req.suite.iter().map(|id| state.scenario(id)).collect::<Result<Vec<_>, _>>()?
    };
    let persistent = state.inner.kb_path.is_some();
    let config = BenchmarkConfig {
        ablations: if req.ablations.is_empty() { vec![Ablation::full()] } else { req.ablations.clone() },
        iterations: req.iterations.unwrap_or(3),
        seed: req.seed.unwrap_or(state.inner.seed),
        parallel: req.parallel,
        initial_kb: persistent.then(|| state.inner.kb.read().clone()),
        gateway: state.inner.gateway.clone(),
        ..Default::default()
    };
    let report = tokio::task::spawn_blocking(move || run_benchmark(&suite, &config))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    if persistent {
        if let Some(merged) = report.merged_knowledge(report.ablations[0]) {
            *state.inner.kb.write() = merged;
            state.save_kb()?;
        }
    }
    Ok(Json(report))
}
