use std::path::Path;

use futures::StreamExt;
use lessons_client::{BenchmarkParams, Client, NewSession};
use lessons_core::orchestrator::{EventType, SessionState, UserMode};
use lessons_core::scenario::Scenario;
use lessons_service::{spawn_local, AppState, ServiceConfig};

fn scenarios() -> Vec<Scenario> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    ["skill", "plan", "retrieval"].iter().flat_map(|d| Scenario::load_all(&root.join(d)).unwrap()).collect()
}

async fn start(config: ServiceConfig) -> Client {
    let addr = spawn_local(AppState::new(ServiceConfig { scenarios: scenarios(), ..config })).await.unwrap();
    Client::new(format!("http://{addr}"))
}

async fn fig1(client: &Client) -> String {
    let created = client
        .create_session(&NewSession { scenario_id: "scissors_in_drawer".into(), ..Default::default() })
        .await
        .unwrap();
    created.session_id
}

async fn step_until_miss(client: &Client, id: &str) {
    loop {
        let r = client.step(id).await.unwrap();
        if r.grasp_missed {
            return;
        }
    }
}

async fn finish_skill(client: &Client, id: &str) {
    loop {
        match client.step(id).await {
            Ok(r) => assert!(!r.grasp_missed && r.error.is_none()),
            Err(e) if e.status() == Some(409) => break,
            Err(e) => panic!("{e}"),
        }
    }
    client.approve(id).await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn fig1_walkthrough_over_http() {
    let client = start(ServiceConfig::default()).await;
    let id = fig1(&client).await;
    let planned = client.instruction(&id, "put the scissors in the top drawer").await.unwrap();
    assert_eq!(planned.plan.unwrap().skills[0], "Pick up the scissors");
    assert_eq!(client.interrupt(&id).await.unwrap(), SessionState::AwaitingCorrection { skill: 0, statement: 0 });
    let r = client.correction(&id, "You should open the drawer first").await.unwrap();
    assert_eq!(r.state, SessionState::ExecutingSkill { skill: 0, cursor: 0 });

    // correcting while the robot runs is refused
    let err = client.correction(&id, "move right").await.unwrap_err();
    assert_eq!(err.status(), Some(409));

    step_until_miss(&client, &id).await;
    client.interrupt(&id).await.unwrap();
    client.correction(&id, "Move a little bit to the right").await.unwrap();
    step_until_miss(&client, &id).await;
    client.interrupt(&id).await.unwrap();
    client.correction(&id, "a bit more").await.unwrap();
    finish_skill(&client, &id).await;
    finish_skill(&client, &id).await;
    finish_skill(&client, &id).await;

    let snap = client.state(&id).await.unwrap();
    assert_eq!(snap.state, SessionState::Done);
    assert_eq!(snap.metrics.corrections, 3);
    assert_eq!(snap.metrics.success, Some(true));

    let kb = client.kb().await.unwrap();
    assert!(kb.entries.iter().any(|e| e.key == "Open the top drawer"));
    let entry = client.kb_entry("skill/open the top drawer").await.unwrap();
    assert!(entry.task_params.contains_key("grasp_offset"));

    let events: Vec<_> = client.events(&id, 0).await.unwrap().collect().await;
    let events: Vec<_> = events.into_iter().map(Result::unwrap).collect();
    assert_eq!(events.len(), snap.events);
    assert!(events.iter().enumerate().all(|(i, e)| e.seq == i as u64));
    let plans: Vec<_> =
        events.iter().filter(|e| e.kind == EventType::Plan && e.payload.get("skills").is_some()).collect();
    assert_eq!(plans[1].payload["skills"].as_array().unwrap().len(), 3);
    assert_eq!(events.last().unwrap().kind, EventType::Done);
}

#[tokio::test(flavor = "multi_thread")]
async fn event_replay_from_offset() {
    let client = start(ServiceConfig::default()).await;
    let id = fig1(&client).await;
    client.instruction(&id, "put the scissors in the top drawer").await.unwrap();
    for _ in 0..3 {
        client.step(&id).await.unwrap();
    }
    let total = client.state(&id).await.unwrap().events;
    assert!(total >= 10);
    let tail: Vec<_> = client.events(&id, 5).await.unwrap().take(total - 5).collect().await;
    let seqs: Vec<u64> = tail.into_iter().map(|e| e.unwrap().seq).collect();
    assert_eq!(seqs, (5..total as u64).collect::<Vec<_>>());
}

#[tokio::test(flavor = "multi_thread")]
async fn reconnect_loses_nothing() {
    let client = start(ServiceConfig::default()).await;
    let id = fig1(&client).await;
    let mut stream = Box::pin(client.events(&id, 0).await.unwrap());
    let first = stream.next().await.unwrap().unwrap();
    assert_eq!(first.seq, 0);
    drop(stream);
    client.instruction(&id, "put the scissors in the top drawer").await.unwrap();
    let mut resumed = Box::pin(client.events(&id, first.seq + 1).await.unwrap());
    let next = resumed.next().await.unwrap().unwrap();
    assert_eq!(next.seq, 1);

    // a live follower sees events published after it connected
    let follower = {
        let client = client.clone();
        let id = id.clone();
        tokio::spawn(async move {
            let events: Vec<_> = client.events(&id, 0).await.unwrap().collect().await;
            events.into_iter().map(|e| e.unwrap().seq).collect::<Vec<_>>()
        })
    };
    client.step(&id).await.unwrap();
    client.approve(&id).await.unwrap();
    let seqs = follower.await.unwrap();
    assert_eq!(seqs, (0..seqs.len() as u64).collect::<Vec<_>>());
    assert_eq!(seqs.len(), client.state(&id).await.unwrap().events);
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_steps_are_serialized() {
    let client = start(ServiceConfig::default()).await;
    let created =
        client.create_session(&NewSession { scenario_id: "open_drawer".into(), ..Default::default() }).await.unwrap();
    let id = created.session_id;
    client.instruction(&id, &created.instruction).await.unwrap();
    let calls: Vec<_> = (0..6)
        .map(|_| {
            let client = client.clone();
            let id = id.clone();
            tokio::spawn(async move { client.step(&id).await })
        })
        .collect();
    let mut indices = Vec::new();
    for c in calls {
        if let Ok(r) = c.await.unwrap() {
            if let Some(e) = r.event {
                indices.push(e.index);
            }
        }
    }
    indices.sort();
    let unique: std::collections::BTreeSet<_> = indices.iter().collect();
    assert_eq!(unique.len(), indices.len());
}

#[tokio::test(flavor = "multi_thread")]
async fn errors_map_to_status_codes() {
    let client = start(ServiceConfig::default()).await;
    let err =
        client.create_session(&NewSession { scenario_id: "nope".into(), ..Default::default() }).await.unwrap_err();
    assert_eq!(err.status(), Some(404));
    assert_eq!(client.step("missing").await.unwrap_err().status(), Some(404));
    let id = fig1(&client).await;
    assert_eq!(client.step(&id).await.unwrap_err().status(), Some(409));
    assert_eq!(client.instruction(&id, "").await.unwrap_err().status(), Some(400));
    assert_eq!(client.kb_entry("skill/none").await.unwrap_err().status(), Some(404));
    assert_eq!(client.kb_delete("skill/none").await.unwrap_err().status(), Some(404));
    assert_eq!(client.run_scripted(&id).await.unwrap_err().status(), Some(409));
}

#[tokio::test(flavor = "multi_thread")]
async fn static_token_is_enforced() {
    let addr = spawn_local(AppState::new(ServiceConfig {
        scenarios: scenarios(),
        token: Some("s3cret".into()),
        ..Default::default()
    }))
    .await
    .unwrap();
    let anonymous = Client::new(format!("http://{addr}"));
    assert_eq!(anonymous.kb().await.unwrap_err().status(), Some(401));
    let ok = Client::new(format!("http://{addr}")).with_token("s3cret");
    assert!(ok.kb().await.unwrap().entries.is_empty());
}

#[tokio::test(flavor = "multi_thread")]
async fn scripted_sessions_and_benchmark() {
    let client = start(ServiceConfig::default()).await;
    let created = client
        .create_session(&NewSession {
            scenario_id: "pick_up_mug".into(),
            user_mode: UserMode::Scripted,
            ..Default::default()
        })
        .await
        .unwrap();
    let report = client.run_scripted(&created.session_id).await.unwrap();
    assert_eq!(report.corrections, 2);
    assert!(report.success);
    let key = report.distilled.iter().find(|k| k.starts_with("skill/")).unwrap().clone();
    client.kb_delete(&key).await.unwrap();
    assert_eq!(client.kb_entry(&key).await.unwrap_err().status(), Some(404));

    let params = BenchmarkParams {
        suite: vec!["open_drawer".into()],
        ablations: vec!["full".parse().unwrap(), "cap".parse().unwrap()],
        iterations: Some(3),
        ..Default::default()
    };
    let a = client.benchmark(&params).await.unwrap();
    let b = client.benchmark(&params).await.unwrap();
    assert_eq!(a, b);
    assert_eq!(a.cells[0].corrections, vec![2, 0, 0]);
    assert_eq!(a.cells[1].corrections, vec![9, 9, 9]);
    assert_eq!(client.scenarios().await.unwrap().len(), 9);
}
