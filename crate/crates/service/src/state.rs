use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use lessons_core::knowledge::{Embedder, HashEmbedder, KnowledgeBase, SharedKb, VISUAL_THRESHOLD};
use lessons_core::lm::Gateway;
use lessons_core::orchestrator::{EventEnvelope, Session};
use lessons_core::scenario::Scenario;
use parking_lot::{Mutex, RwLock};
use tokio::sync::watch;

use crate::ApiError;

#[derive(Clone, Default)]
pub struct ServiceConfig {
    pub scenarios: Vec<Scenario>,
    /// Knowledge shared by live sessions; a fresh 16-d base when `None`.
    pub kb: Option<KnowledgeBase>,
    /// Where knowledge is saved after it changes. Benchmarks start clean
    /// unless this is set.
    pub kb_path: Option<PathBuf>,
    pub seed: u64,
    /// Backend for every session; each scenario's scripted rules when `None`.
    pub gateway: Option<Gateway>,
    /// Required bearer token, if any.
    pub token: Option<String>,
}

pub(crate) struct SessionSlot {
    pub session: Mutex<Session>,
    /// Copy of the session's event log readable without the session lock.
    pub events: RwLock<Vec<EventEnvelope>>,
    pub notify: watch::Sender<u64>,
}

impl SessionSlot {
    pub fn new(session: Session) -> Self {
        let events = session.events().all().to_vec();
        let (notify, _) = watch::channel(events.len() as u64);
        SessionSlot { session: Mutex::new(session), events: RwLock::new(events), notify }
    }

    /// Copy new events out of the session and wake stream readers.
    pub fn publish(&self, session: &Session) {
        let mut mirror = self.events.write();
        let new = session.events().since(mirror.len() as u64);
        mirror.extend_from_slice(new);
        self.notify.send_replace(mirror.len() as u64);
    }
}

pub(crate) struct Inner {
    pub scenarios: BTreeMap<String, Arc<Scenario>>,
    pub sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    pub kb: SharedKb,
    pub kb_path: Option<PathBuf>,
    pub embedder: Arc<dyn Embedder>,
    pub seed: u64,
    pub gateway: Option<Gateway>,
    pub token: Option<String>,
}

#[derive(Clone)]
pub struct AppState {
    pub(crate) inner: Arc<Inner>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        let kb = config.kb.unwrap_or_default();
        let dim = kb.dim();
        AppState {
            inner: Arc::new(Inner {
                scenarios: config.scenarios.into_iter().map(|s| (s.id.clone(), Arc::new(s))).collect(),
                sessions: RwLock::new(HashMap::new()),
                kb: kb.shared(),
                kb_path: config.kb_path,
                embedder: Arc::new(HashEmbedder::new(dim, config.seed)),
                seed: config.seed,
                gateway: config.gateway,
                token: config.token,
            }),
        }
    }

    pub(crate) fn scenario(&self, id: &str) -> Result<Arc<Scenario>, ApiError> {
        self.inner.scenarios.get(id).cloned().ok_or_else(|| ApiError::not_found(format!("scenario {id:?}")))
    }

    pub(crate) fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.inner.sessions.read().get(id).cloned().ok_or_else(|| ApiError::not_found(format!("session {id:?}")))
    }

    pub(crate) fn gateway_for(&self, scenario: &Scenario) -> Gateway {
        self.inner.gateway.clone().unwrap_or_else(|| Gateway::scripted(scenario.backend_rules.clone()))
    }

    pub(crate) fn threshold(&self) -> f64 {
        VISUAL_THRESHOLD
    }

    /// Persist the shared knowledge base when a path is configured.
    pub(crate) fn save_kb(&self) -> Result<(), ApiError> {
        if let Some(path) = &self.inner.kb_path {
            self.inner.kb.read().save(path).map_err(|e| ApiError::internal(e.to_string()))?;
        }
        Ok(())
    }
}
