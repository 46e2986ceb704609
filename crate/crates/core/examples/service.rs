//! Start the annotation API on a local port and drive it the way the
//! workbench does: fetch the queue, submit labels, retrain, poll the job.
//!
//! ```text
//! cargo run --example service
//! ```

use std::sync::Arc;
use std::thread;
use std::time::Duration;

use anyhow::{bail, Result};
use esg_clarity::annotation::AnnotationStore;
use esg_clarity::config::PipelineConfig;
use esg_clarity::ingest::SentenceRecord;
use esg_clarity::service::{serve, ServiceState};
use esg_clarity::synth::synthetic_clarity_corpus;
use serde_json::{json, Value};

fn main() -> Result<()> {
    let labeled = synthetic_clarity_corpus(8, 4);
    let corpus: Vec<SentenceRecord> = labeled
        .iter()
        .enumerate()
        .map(|(i, (t, _))| SentenceRecord::new("demo", i, t.clone()))
        .collect();
    let state = Arc::new(ServiceState::new(
        AnnotationStore::in_memory(corpus),
        &PipelineConfig::default(),
    )?);

    let addr = std::net::TcpListener::bind("127.0.0.1:0")?.local_addr()?;
    let server = state.clone();
    thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().expect("runtime");
        rt.block_on(serve(server, addr)).expect("server");
    });
    let base = format!("http://{addr}/api");
    let http = reqwest::blocking::Client::new();
    for _ in 0..50 {
        if http.get(format!("{base}/stats")).send().is_ok() {
            break;
        }
        thread::sleep(Duration::from_millis(50));
    }

    let queue: Vec<Value> = http
        .get(format!("{base}/queue?annotator=ann1&limit=100"))
        .send()?
        .json()?;
    println!("queue for ann1: {} sentences", queue.len());
    for item in &queue {
        let sid = item["sentence_id"].as_str().unwrap_or_default();
        let index: usize = sid.rsplit(':').next().unwrap_or("0").parse()?;
        let body = json!({ "sentence_id": sid, "annotator_id": "ann1", "label": labeled[index].1 });
        http.post(format!("{base}/annotations"))
            .json(&body)
            .send()?
            .error_for_status()?;
    }

    let job: Value = http.post(format!("{base}/retrain")).send()?.json()?;
    let id = job["job_id"].as_str().unwrap_or_default().to_string();
    println!("retrain started as {id}");
    let status = loop {
        let s: Value = http.get(format!("{base}/jobs/{id}")).send()?.json()?;
        if s["state"] == "done" || s["state"] == "failed" {
            break s;
        }
        thread::sleep(Duration::from_millis(100));
    };
    if status["state"] != "done" {
        bail!("retrain failed: {}", status["message"]);
    }

    let stats: Value = http.get(format!("{base}/stats")).send()?.json()?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    let next: Vec<Value> = http
        .get(format!("{base}/queue?annotator=ann2&limit=3"))
        .send()?
        .json()?;
    for item in next {
        println!(
            "ann2 sees {} proposed {} ({:.2})",
            item["sentence_id"], item["proposed_label"], item["confidence"]
        );
    }
    Ok(())
}
