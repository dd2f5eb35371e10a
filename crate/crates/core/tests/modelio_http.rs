//! Endpoint-collection behavior against an in-process mock HTTP server:
//! resumable journaling, deterministic request order at concurrency 1,
//! retry handling, and option-logprob extraction.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use culture_probe_core::modelio::{
    collect, collect_option_scores, prompt_hash, read_generations, EndpointConfig, ModelIoError,
    OutputKind, PromptJob, RetryPolicy,
};
use culture_probe_core::values::renormalize_log_scores;

/// Minimal chat-completions mock: answers every POST via the handler, which
/// receives the JSON body and a running request index.
struct MockServer {
    base_url: String,
    requests: Arc<Mutex<Vec<serde_json::Value>>>,
    handle: Option<thread::JoinHandle<()>>,
}

impl MockServer {
    fn start<F>(handler: F) -> Self
    where
        F: Fn(&serde_json::Value, usize) -> (u16, String) + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let port = listener.local_addr().unwrap().port();
        let requests: Arc<Mutex<Vec<serde_json::Value>>> = Arc::new(Mutex::new(Vec::new()));
        let requests_inner = Arc::clone(&requests);
        let handler = Arc::new(handler);
        let counter = Arc::new(AtomicUsize::new(0));

        let handle = thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let requests = Arc::clone(&requests_inner);
                let handler = Arc::clone(&handler);
                let counter = Arc::clone(&counter);
                thread::spawn(move || {
                    let _ = serve_connection(stream, &requests, handler.as_ref(), &counter);
                });
            }
        });

        MockServer {
            base_url: format!("http://127.0.0.1:{port}"),
            requests,
            handle: Some(handle),
        }
    }

    fn request_count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }

    fn request_prompts(&self) -> Vec<String> {
        self.requests
            .lock()
            .unwrap()
            .iter()
            .filter_map(|body| {
                body.pointer("/messages/0/content")
                    .and_then(|v| v.as_str())
                    .map(str::to_string)
            })
            .collect()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        // unblock the accept loop; the listener closes when its thread dies
        if let Some(handle) = self.handle.take() {
            drop(TcpStream::connect(
                self.base_url.trim_start_matches("http://"),
            ));
            drop(handle);
        }
    }
}

fn serve_connection(
    mut stream: TcpStream,
    requests: &Mutex<Vec<serde_json::Value>>,
    handler: &(dyn Fn(&serde_json::Value, usize) -> (u16, String) + Send + Sync),
    counter: &AtomicUsize,
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    if request_line.is_empty() {
        return Ok(());
    }
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        if line == "\r\n" || line == "\n" || line.is_empty() {
            break;
        }
        if let Some(value) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = value.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let json: serde_json::Value = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
    let index = counter.fetch_add(1, Ordering::SeqCst);
    requests.lock().unwrap().push(json.clone());

    let (status, response_body) = handler(&json, index);
    let reason = if status == 200 { "OK" } else { "Error" };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{response_body}",
        response_body.len()
    )?;
    stream.flush()
}

fn chat_response(text: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": text}}]
    })
    .to_string()
}

fn config(base_url: &str, concurrency: usize) -> EndpointConfig {
    EndpointConfig {
        base_url: base_url.to_string(),
        api_key_env: None,
        model_name: "mock-model".to_string(),
        max_concurrent_requests: concurrency,
        timeout_secs: 10,
        retry: RetryPolicy {
            max_retries: 2,
            initial_backoff_ms: 10,
        },
        temperature: 0.0,
        max_tokens: 64,
        top_logprobs: 10,
    }
}

fn generation_job(id: &str, prompt: &str) -> PromptJob {
    PromptJob {
        id: id.to_string(),
        kind: OutputKind::Generation,
        prompt: prompt.to_string(),
        option_symbols: Vec::new(),
    }
}

#[test]
fn collect_echoes_fixed_text_into_records() {
    let server = MockServer::start(|_, _| (200, chat_response("fruit, red, tree")));
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("journal.jsonl");
    let jobs = vec![
        generation_job("apple", "prompt about apple"),
        generation_job("dog", "prompt about dog"),
    ];
    let outcome = collect(&config(&server.base_url, 2), &jobs, &journal).unwrap();
    assert_eq!(outcome.generations.len(), 2);
    assert_eq!(outcome.skipped, 0);
    assert!(outcome.failed.is_empty());
    for record in &outcome.generations {
        assert_eq!(record.raw_text, "fruit, red, tree");
        assert_eq!(record.words, vec!["fruit", "red", "tree"]);
        assert_eq!(record.model_name, "mock-model");
    }
    // journal lines are keyed by prompt hash
    let text = std::fs::read_to_string(&journal).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.contains(&prompt_hash("prompt about apple")));
}

#[test]
fn rerun_skips_journaled_prompts_and_preserves_bytes() {
    let server = MockServer::start(|_, _| (200, chat_response("alpha, beta")));
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("journal.jsonl");
    let jobs: Vec<PromptJob> = (0..3)
        .map(|i| generation_job(&format!("cue{i}"), &format!("prompt {i}")))
        .collect();
    let cfg = config(&server.base_url, 1);

    let first = collect(&cfg, &jobs, &journal).unwrap();
    assert_eq!(first.generations.len(), 3);
    let bytes_after_first = std::fs::read(&journal).unwrap();
    assert_eq!(server.request_count(), 3);

    let second = collect(&cfg, &jobs, &journal).unwrap();
    assert_eq!(second.skipped, 3);
    assert_eq!(second.generations.len(), 3);
    assert_eq!(server.request_count(), 3, "rerun must not re-request");
    let bytes_after_second = std::fs::read(&journal).unwrap();
    assert_eq!(bytes_after_first, bytes_after_second);

    // a new prompt triggers exactly one more request
    let mut extended = jobs.clone();
    extended.push(generation_job("cue3", "prompt 3"));
    let third = collect(&cfg, &extended, &journal).unwrap();
    assert_eq!(third.skipped, 3);
    assert_eq!(third.generations.len(), 4);
    assert_eq!(server.request_count(), 4);
}

#[test]
fn concurrency_one_requests_in_job_order() {
    let server = MockServer::start(|_, _| (200, chat_response("x")));
    let dir = tempfile::tempdir().unwrap();
    let jobs = vec![
        generation_job("first", "prompt one"),
        generation_job("second", "prompt two"),
    ];
    collect(
        &config(&server.base_url, 1),
        &jobs,
        &dir.path().join("j.jsonl"),
    )
    .unwrap();
    assert_eq!(
        server.request_prompts(),
        vec!["prompt one".to_string(), "prompt two".to_string()]
    );
}

#[test]
fn transient_failures_retry_then_succeed() {
    let server = MockServer::start(|_, index| {
        if index == 0 {
            (500, "{\"error\": \"overloaded\"}".to_string())
        } else {
            (200, chat_response("recovered"))
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("j.jsonl");
    let jobs = vec![generation_job("cue", "prompt")];
    let outcome = collect(&config(&server.base_url, 1), &jobs, &journal).unwrap();
    assert_eq!(outcome.generations.len(), 1);
    assert_eq!(outcome.generations[0].raw_text, "recovered");
    let text = std::fs::read_to_string(&journal).unwrap();
    let entry: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(entry["attempt"], 2);
}

#[test]
fn exhausted_retries_record_failure() {
    let server = MockServer::start(|_, _| (500, "{\"error\": \"down\"}".to_string()));
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("j.jsonl");
    let jobs = vec![generation_job("cue", "prompt")];
    let outcome = collect(&config(&server.base_url, 1), &jobs, &journal).unwrap();
    assert!(outcome.generations.is_empty());
    assert_eq!(outcome.failed, vec!["cue"]);
    // 1 initial + 2 retries
    assert_eq!(server.request_count(), 3);
}

#[test]
fn failed_job_recovers_on_rerun() {
    // run 1 exhausts its 3 attempts against a dead endpoint; run 2 succeeds
    let server = MockServer::start(|_, index| {
        if index < 3 {
            (500, "{\"error\": \"down\"}".to_string())
        } else {
            (200, chat_response("back online"))
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("j.jsonl");
    let jobs = vec![generation_job("cue", "prompt")];
    let cfg = config(&server.base_url, 1);

    let first = collect(&cfg, &jobs, &journal).unwrap();
    assert_eq!(first.failed, vec!["cue"]);
    assert!(first.generations.is_empty());

    let second = collect(&cfg, &jobs, &journal).unwrap();
    assert_eq!(
        second.skipped, 0,
        "failed jobs must be retried, not skipped"
    );
    assert!(
        second.failed.is_empty(),
        "recovered job still reported failed"
    );
    assert_eq!(second.generations.len(), 1);
    assert_eq!(second.generations[0].raw_text, "back online");
    // both runs are journaled
    let text = std::fs::read_to_string(&journal).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn option_scores_extract_and_renormalize_to_softmax() {
    let server = MockServer::start(|body, _| {
        assert_eq!(body["max_tokens"], 1);
        assert_eq!(body["logprobs"], true);
        let response = serde_json::json!({
            "choices": [{
                "message": {"role": "assistant", "content": "1"},
                "logprobs": {"content": [{
                    "token": "1",
                    "logprob": -0.2,
                    "top_logprobs": [
                        {"token": "1", "logprob": -0.2},
                        {"token": "2", "logprob": -1.7},
                        {"token": "3", "logprob": -3.0},
                        {"token": "4", "logprob": -0.9}
                    ]
                }]}
            }]
        });
        (200, response.to_string())
    });
    let symbols: Vec<String> = ["1", "2", "3", "4"].iter().map(|s| s.to_string()).collect();
    let (record, flags) = collect_option_scores(
        &config(&server.base_url, 1),
        "Q1",
        &symbols,
        "survey prompt",
    )
    .unwrap();
    assert!(flags.is_empty());
    assert_eq!(record.log_scores, vec![-0.2, -1.7, -3.0, -0.9]);

    // downstream renormalization equals the softmax oracle
    let distribution = renormalize_log_scores(&record.log_scores).unwrap();
    let expected = [
        0.5616319367963084,
        0.1253170240018331,
        0.0341528732489060,
        0.2788981659529525,
    ];
    for (got, want) in distribution.probs().iter().zip(&expected) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn absent_option_symbol_becomes_neg_infinity_with_flag() {
    let server = MockServer::start(|_, _| {
        let response = serde_json::json!({
            "choices": [{
                "message": {"role": "assistant", "content": "1"},
                "logprobs": {"content": [{
                    "token": "1",
                    "logprob": -0.1,
                    "top_logprobs": [
                        {"token": "1", "logprob": -0.1},
                        {"token": "2", "logprob": -2.4}
                    ]
                }]}
            }]
        });
        (200, response.to_string())
    });
    let symbols: Vec<String> = ["1", "2", "3"].iter().map(|s| s.to_string()).collect();
    let (record, flags) =
        collect_option_scores(&config(&server.base_url, 1), "Q2", &symbols, "p").unwrap();
    assert_eq!(record.log_scores[2], f64::NEG_INFINITY);
    assert_eq!(flags.len(), 1);
    assert!(flags[0].contains("'3'"));
}

#[test]
fn missing_logprob_support_is_a_capability_error() {
    let server = MockServer::start(|_, _| (200, chat_response("1")));
    let symbols: Vec<String> = vec!["1".to_string(), "2".to_string()];
    let err = collect_option_scores(&config(&server.base_url, 1), "Q3", &symbols, "p").unwrap_err();
    assert!(matches!(err, ModelIoError::Capability(_)));
}

#[test]
fn journaled_records_round_trip_through_readers() {
    let server = MockServer::start(|_, _| (200, chat_response("one, two, three")));
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("j.jsonl");
    let jobs = vec![generation_job("cue", "prompt")];
    let outcome = collect(&config(&server.base_url, 1), &jobs, &journal).unwrap();

    let outputs = dir.path().join("outputs.jsonl");
    let mut buffer = Vec::new();
    culture_probe_core::modelio::write_generation_outputs(&outcome.generations, &mut buffer)
        .unwrap();
    std::fs::write(&outputs, &buffer).unwrap();
    let (records, errors) = read_generations(&outputs).unwrap();
    assert!(errors.is_empty());
    assert_eq!(records, outcome.generations);
}
