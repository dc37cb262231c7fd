//! A run against a local chat-completions server, then the same run served
//! entirely from the response cache.

mod common;

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde_json::{json, Value};

use common::{fixture, options};

use agsr::pipeline::{execute, RunConfig};
use agsr::report::render_json;

fn answer(prompt: &str) -> String {
    match prompt.lines().find_map(|l| l.strip_prefix("Attribute: ")) {
        Some(name) => json!({ "salient": name == "color" || name == "light" }).to_string(),
        None => json!({
            "emotion": "Calm",
            "arousal": "low",
            "valence": "positive",
            "explanation": "Soft and still."
        })
        .to_string(),
    }
}

fn handle(stream: std::net::TcpStream) {
    let mut reader = BufReader::new(stream);
    let mut len = 0;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
            break;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            len = v.trim().parse().unwrap_or(0);
        }
    }
    let mut buf = vec![0; len];
    if reader.read_exact(&mut buf).is_err() {
        return;
    }
    let req: Value = serde_json::from_slice(&buf).unwrap();
    let prompt = req["messages"][0]["content"][0]["text"].as_str().unwrap_or("");
    let body = json!({
        "choices": [{ "message": { "role": "assistant", "content": answer(prompt) } }],
        "usage": { "prompt_tokens": 10, "completion_tokens": 4 }
    })
    .to_string();
    let mut stream = reader.into_inner();
    let _ = write!(
        stream,
        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
}

fn serve() -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let h = Arc::clone(&hits);
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            h.fetch_add(1, Ordering::SeqCst);
            thread::spawn(move || handle(stream));
        }
    });
    (url, hits)
}

fn setup(dir: &Path, url: &str) -> RunConfig {
    for f in ["manifest.json", "records.jsonl", "salience.jsonl"] {
        fs::copy(fixture("synthetic24").join(f), dir.join(f)).unwrap();
    }
    fs::create_dir_all(dir.join("images")).unwrap();
    for i in 1..=24 {
        fs::write(dir.join(format!("images/art{i:02}.png")), b"\x89PNG\r\n\x1a\nstub").unwrap();
    }
    let text = format!(
        r#"
[dataset]
manifest = "manifest.json"

[condition]
name = "fabg"

[backends.attribute]
kind = "http"
model_id = "local-vlm"
endpoint = {{ base_url = "{url}", timeout_ms = 5000, max_retries = 0 }}

[backends.final]
kind = "http"
model_id = "local-vlm"
endpoint = {{ base_url = "{url}", timeout_ms = 5000, max_retries = 0 }}

[run]
seed = 3
cache_dir = "cache"
"#
    );
    let path = dir.join("http.toml");
    fs::write(&path, text).unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    cfg.validate().unwrap();
    cfg
}

#[test]
fn cached_replay_matches_live_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (url, hits) = serve();
    let cfg = setup(tmp.path(), &url);

    let live = tmp.path().join("live");
    let summary = execute(&cfg, &options(&live)).unwrap();
    assert!(summary.complete);
    assert_eq!(summary.record_errors, 0);
    assert_eq!(hits.load(Ordering::SeqCst), 24 * 6);

    let replay = tmp.path().join("replay");
    execute(&cfg, &options(&replay)).unwrap();
    assert_eq!(hits.load(Ordering::SeqCst), 24 * 6, "replay reached the server");

    let a = fs::read(live.join("records.jsonl")).unwrap();
    let b = fs::read(replay.join("records.jsonl")).unwrap();
    assert_eq!(a, b);
    let manifest = tmp.path().join("manifest.json");
    let manifest = manifest.to_str().unwrap();
    let (_, ra) = score_at(&live, manifest);
    let (_, rb) = score_at(&replay, manifest);
    assert_eq!(render_json(&ra).unwrap(), render_json(&rb).unwrap());

    let al = ra.alignment.unwrap();
    assert_eq!(ra.flooding.sparsity_distribution, [0, 0, 24, 0, 0, 0]);
    assert!(al.sample_wise_mean_dice < 1.0);

    let telemetry = fs::read_to_string(replay.join("telemetry.jsonl")).unwrap();
    assert!(telemetry.lines().all(|l| l.contains("\"cache_hit\":true")));
}

fn score_at(dir: &Path, manifest: &str) -> (agsr::pipeline::RunArtifact, agsr::report::EvaluationReport) {
    let art = agsr::pipeline::load_run(dir).unwrap();
    let gold = agsr::corpus::load_dataset(manifest).unwrap();
    let report = agsr::report::score_run(&art, &gold, common::params()).unwrap();
    (art, report)
}
