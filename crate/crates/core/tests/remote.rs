use std::collections::VecDeque;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use lessons_core::lm::{Gateway, LmError, PromptKind, PromptRequest, RemoteBackend, RemoteConfig, Reply, Transcript};
use serde_json::{json, Value};

/// Authorization header and JSON body of one request.
type Seen = (Option<String>, Value);

#[derive(Clone, Default)]
struct Mock {
    replies: Arc<Mutex<VecDeque<(StatusCode, Value)>>>,
    seen: Arc<Mutex<Vec<Seen>>>,
}

async fn chat(State(m): State<Mock>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let auth = headers.get("authorization").and_then(|v| v.to_str().ok()).map(str::to_string);
    m.seen.lock().unwrap().push((auth, body));
    let (status, reply) = m.replies.lock().unwrap().pop_front().unwrap_or((StatusCode::NOT_FOUND, json!({})));
    (status, Json(reply))
}

fn content(text: &str) -> (StatusCode, Value) {
    (StatusCode::OK, json!({"choices": [{"message": {"role": "assistant", "content": text}}]}))
}

/// Serve the mock on its own runtime; the backend under test is blocking.
fn serve(mock: Mock) -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            let app = Router::new().route("/v1/chat/completions", post(chat)).with_state(mock);
            axum::serve(listener, app).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

fn gateway(addr: SocketAddr, key_env: &str) -> Gateway {
    let cfg = RemoteConfig::from_toml(&format!(
        "endpoint = \"http://{addr}/v1/chat/completions\"\nmodel = \"test-model\"\napi_key_env = \"{key_env}\"\ntimeout_secs = 5\n"
    ))
    .unwrap();
    Gateway::new(Arc::new(RemoteBackend::new(cfg).unwrap()))
}

fn plan_request() -> PromptRequest {
    PromptRequest::new(PromptKind::Plan)
        .with("instruction", "put the scissors in the top drawer")
        .with("object_state", "top drawer(closed)")
}

#[test]
fn malformed_reply_is_retried_once() {
    let mock = Mock::default();
    mock.replies.lock().unwrap().extend([
        content("Sure, here is a plan without numbers."),
        content(
            "1: \"Open the top drawer\",\n2: \"Pick up the scissors\",\n3: \"Put the scissors into the top drawer\"",
        ),
    ]);
    let addr = serve(mock.clone());
    std::env::set_var("LESSONS_REMOTE_TEST_KEY", "sk-test");
    let gw = gateway(addr, "LESSONS_REMOTE_TEST_KEY");
    let mut t = Transcript::default();
    let reply = gw.complete(&plan_request(), &mut t).unwrap();
    assert_eq!(
        reply,
        Reply::Plan(vec![
            "Open the top drawer".into(),
            "Pick up the scissors".into(),
            "Put the scissors into the top drawer".into()
        ])
    );
    assert_eq!(t.entries.len(), 2);
    assert!(t.entries[0].error.is_some());
    assert_eq!(t.entries[1].attempt, 1);
    assert!(t.entries[1].wire.as_ref().unwrap().response.contains("choices"));

    let seen = mock.seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    assert_eq!(seen[0].0.as_deref(), Some("Bearer sk-test"));
    assert_eq!(seen[0].1["model"], "test-model");
    assert_eq!(seen[0].1["temperature"], 0);
    let prompt = seen[0].1["messages"][0]["content"].as_str().unwrap();
    assert!(prompt.contains("Object state: top drawer(closed)"));
    assert!(prompt.ends_with("Instruction: put the scissors in the top drawer\nPlan:"));
}

#[test]
fn http_errors_surface_as_transport_errors() {
    let mock = Mock::default();
    mock.replies.lock().unwrap().push_back((StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "overloaded"})));
    let addr = serve(mock.clone());
    let gw = gateway(addr, "LESSONS_REMOTE_TEST_UNSET_KEY");
    let mut t = Transcript::default();
    let err = gw.complete(&plan_request(), &mut t).unwrap_err();
    assert!(matches!(&err, LmError::Transport(m) if m.contains("500")), "{err:?}");
    assert_eq!(t.entries.len(), 1);
    assert_eq!(mock.seen.lock().unwrap()[0].0, None);
}
