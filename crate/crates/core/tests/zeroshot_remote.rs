use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use esg_clarity::zeroshot::{
    classify_zero_shot, GenerativeClient, PromptTemplate, RemoteClient, RemoteConfig, ReplayClient, TranscriptEntry,
};
use esg_clarity::ClarityLabel;
use serde_json::{json, Value};

/// Serves chat completions, failing the first `fail_first` requests with 500.
fn spawn_mock(fail_first: usize, answer: &'static str) -> (SocketAddr, Arc<AtomicUsize>) {
    let calls = Arc::new(AtomicUsize::new(0));
    let state = (calls.clone(), fail_first, answer);
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = Router::new()
                .route(
                    "/v1/chat/completions",
                    post(
                        |State((calls, fail_first, answer)): State<(Arc<AtomicUsize>, usize, &'static str)>,
                         Json(body): Json<Value>| async move {
                            let n = calls.fetch_add(1, Ordering::SeqCst);
                            assert_eq!(body["model"], "mock-model");
                            if n < fail_first {
                                return Err(StatusCode::INTERNAL_SERVER_ERROR);
                            }
                            Ok(Json(
                                json!({"choices": [{"message": {"role": "assistant", "content": answer}}]}),
                            ))
                        },
                    ),
                )
                .with_state(state);
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (rx.recv().unwrap(), calls)
}

fn config(addr: SocketAddr, transcript: Option<std::path::PathBuf>) -> RemoteConfig {
    RemoteConfig {
        endpoint: format!("http://{addr}/v1"),
        model: "mock-model".into(),
        api_key: "test-key".into(),
        max_retries: 3,
        initial_backoff_ms: 1,
        max_backoff_ms: 4,
        requests_per_second: 1000.0,
        max_in_flight: 2,
        timeout_secs: 10,
        transcript,
    }
}

#[test]
fn retries_then_journals_and_replays_identically() -> anyhow::Result<()> {
    let (addr, calls) = spawn_mock(2, "Ambiguous");
    let dir = tempfile::tempdir()?;
    let journal = dir.path().join("live.jsonl");
    let client = GenerativeClient::Remote(RemoteClient::new(config(addr, Some(journal.clone())))?);
    let items = [
        ("a", "The adviser may use discretion."),
        ("b", "Companies are screened."),
    ];
    let template = PromptTemplate::default();

    let live = classify_zero_shot(&client, &template, &items)?;
    assert!(live
        .iter()
        .all(|v| v.label == Some(ClarityLabel::Ambiguous) && !v.transport_error));
    assert_eq!(calls.load(Ordering::SeqCst), 4);

    let entries: Vec<TranscriptEntry> = esg_clarity::io::read_jsonl(&journal)?;
    assert_eq!(entries.len(), 2);
    let replay = GenerativeClient::Replay(ReplayClient::from_entries(entries));
    assert_eq!(classify_zero_shot(&replay, &template, &items)?, live);
    Ok(())
}

#[test]
fn exhausted_retries_become_flagged_abstentions() -> anyhow::Result<()> {
    let (addr, calls) = spawn_mock(usize::MAX, "Generic");
    let client = GenerativeClient::Remote(RemoteClient::new(config(addr, None))?);
    let v = classify_zero_shot(&client, &PromptTemplate::default(), &[("x", "Text.")])?;
    assert_eq!(v.len(), 1);
    assert!(v[0].transport_error);
    assert_eq!(v[0].label, None);
    assert_eq!(calls.load(Ordering::SeqCst), 4);
    Ok(())
}
