//! Bridge to language models: read precomputed output files, or collect
//! generations, ranked responses, and constrained option log-scores from a
//! chat-completion-style HTTP endpoint with bounded concurrency, retries,
//! and a resumable JSON-lines journal keyed by prompt hash.

use std::collections::{HashMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metrics::parse_ranked_response;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid endpoint config: {0}")]
    InvalidConfig(String),
    #[error("api key environment variable '{0}' is not set")]
    MissingApiKey(String),
    #[error("http error: {0}")]
    Http(String),
    #[error("endpoint capability missing: {0}")]
    Capability(String),
}

/// Retry policy for transient endpoint failures: exponential backoff
/// starting at `initial_backoff_ms`, doubling per attempt.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            initial_backoff_ms: 500,
        }
    }
}

/// Connection settings for a chat-completion-style endpoint. The API key is
/// read from the environment variable named by `api_key_env`, never stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EndpointConfig {
    pub base_url: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
    pub model_name: String,
    #[serde(default = "default_concurrency")]
    pub max_concurrent_requests: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_top_logprobs")]
    pub top_logprobs: u32,
}

fn default_concurrency() -> usize {
    4
}
fn default_timeout() -> u64 {
    60
}
fn default_max_tokens() -> u32 {
    1024
}
fn default_top_logprobs() -> u32 {
    20
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), ModelIoError> {
        if self.max_concurrent_requests < 1 {
            return Err(ModelIoError::InvalidConfig(
                "maxConcurrentRequests must be >= 1".to_string(),
            ));
        }
        if self.timeout_secs == 0 {
            return Err(ModelIoError::InvalidConfig(
                "timeout must be > 0".to_string(),
            ));
        }
        if self.base_url.trim().is_empty() {
            return Err(ModelIoError::InvalidConfig("baseUrl is empty".to_string()));
        }
        Ok(())
    }

    fn api_key(&self) -> Result<Option<String>, ModelIoError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| ModelIoError::MissingApiKey(var.clone())),
        }
    }
}

/// Hex-encoded SHA-256 of a rendered prompt; the journal key.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// What a journal entry or output line holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputKind {
    #[serde(rename = "generation")]
    Generation,
    #[serde(rename = "ranking")]
    Ranking,
    #[serde(rename = "optionScores")]
    OptionScores,
}

/// A model generation tied to the prompt that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerationRecord {
    pub cue: String,
    #[serde(default)]
    pub raw_text: String,
    pub words: Vec<String>,
    #[serde(default)]
    pub model_name: String,
    #[serde(default)]
    pub prompt_hash: String,
}

/// Per-option log scores for one survey question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OptionScoreRecord {
    pub question_id: String,
    pub option_symbols: Vec<String>,
    /// Aligned to `option_symbols`; missing options are `-inf` (JSON null).
    #[serde(
        serialize_with = "serialize_log_scores",
        deserialize_with = "deserialize_log_scores"
    )]
    pub log_scores: Vec<f64>,
    #[serde(default)]
    pub model_name: String,
}

fn serialize_log_scores<S: serde::Serializer>(
    scores: &[f64],
    serializer: S,
) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = serializer.serialize_seq(Some(scores.len()))?;
    for s in scores {
        if s.is_finite() {
            seq.serialize_element(s)?;
        } else {
            seq.serialize_element(&Option::<f64>::None)?;
        }
    }
    seq.end()
}

fn deserialize_log_scores<'de, D: serde::Deserializer<'de>>(
    deserializer: D,
) -> Result<Vec<f64>, D::Error> {
    let raw: Vec<Option<f64>> = Vec::deserialize(deserializer)?;
    Ok(raw
        .into_iter()
        .map(|v| v.unwrap_or(f64::NEG_INFINITY))
        .collect())
}

/// A malformed output line, reported but not fatal.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawGenerationLine {
    cue: String,
    #[serde(default)]
    words: Option<Vec<String>>,
    #[serde(default)]
    raw_text: Option<String>,
    #[serde(default)]
    model_name: Option<String>,
    #[serde(default)]
    prompt_hash: Option<String>,
}

/// Split a free-form generation (the comma-joined association list format)
/// into distinct lower-cased words.
pub fn split_generated_words(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut seen = HashSet::new();
    for piece in text.split(['，', ',', '\n', ';', '；']) {
        let word = piece.trim().to_lowercase();
        if !word.is_empty() && seen.insert(word.clone()) {
            words.push(word);
        }
    }
    words
}

fn read_generation_lines(
    path: &Path,
    kind: OutputKind,
) -> Result<(Vec<GenerationRecord>, Vec<LineError>), ModelIoError> {
    let file = fs::File::open(path)?;
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawGenerationLine = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                errors.push(LineError {
                    line: i + 1,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let raw_text = raw.raw_text.unwrap_or_default();
        let words = match raw.words {
            Some(words) => words,
            None if !raw_text.is_empty() => match kind {
                OutputKind::Ranking => parse_ranked_response(&raw_text).ordered_words,
                _ => split_generated_words(&raw_text),
            },
            None => {
                errors.push(LineError {
                    line: i + 1,
                    message: "line has neither 'words' nor 'rawText'".to_string(),
                });
                continue;
            }
        };
        records.push(GenerationRecord {
            cue: raw.cue,
            raw_text,
            words,
            model_name: raw.model_name.unwrap_or_default(),
            prompt_hash: raw.prompt_hash.unwrap_or_default(),
        });
    }
    Ok((records, errors))
}

/// Read generation outputs: JSON lines `{cue, words[]}` or `{cue, rawText}`.
/// Raw text is split on the association-list separators.
pub fn read_generations(
    path: &Path,
) -> Result<(Vec<GenerationRecord>, Vec<LineError>), ModelIoError> {
    read_generation_lines(path, OutputKind::Generation)
}

/// Read ranking outputs; raw text goes through the `Rank <n>:` parser.
pub fn read_rankings(path: &Path) -> Result<(Vec<GenerationRecord>, Vec<LineError>), ModelIoError> {
    read_generation_lines(path, OutputKind::Ranking)
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawOptionScoreLine {
    question_id: String,
    #[serde(default)]
    option_symbols: Option<Vec<String>>,
    #[serde(default)]
    log_scores: Option<Vec<Option<f64>>>,
    #[serde(default)]
    probs: Option<Vec<f64>>,
    #[serde(default)]
    model_name: Option<String>,
}

/// Read option-score outputs: JSON lines `{questionId, logScores[]}` (null =
/// missing option) or `{questionId, probs[]}`.
pub fn read_option_scores(
    path: &Path,
) -> Result<(Vec<OptionScoreRecord>, Vec<LineError>), ModelIoError> {
    let file = fs::File::open(path)?;
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawOptionScoreLine = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                errors.push(LineError {
                    line: i + 1,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let log_scores: Vec<f64> = match (raw.log_scores, raw.probs) {
            (Some(logs), _) => logs
                .into_iter()
                .map(|v| v.unwrap_or(f64::NEG_INFINITY))
                .collect(),
            (None, Some(probs)) => probs.iter().map(|p| p.ln()).collect(),
            (None, None) => {
                errors.push(LineError {
                    line: i + 1,
                    message: "line has neither 'logScores' nor 'probs'".to_string(),
                });
                continue;
            }
        };
        let option_symbols = raw
            .option_symbols
            .unwrap_or_else(|| (1..=log_scores.len()).map(|i| i.to_string()).collect());
        if option_symbols.len() != log_scores.len() {
            errors.push(LineError {
                line: i + 1,
                message: format!(
                    "{} option symbols but {} scores",
                    option_symbols.len(),
                    log_scores.len()
                ),
            });
            continue;
        }
        records.push(OptionScoreRecord {
            question_id: raw.question_id,
            option_symbols,
            log_scores,
            model_name: raw.model_name.unwrap_or_default(),
        });
    }
    Ok((records, errors))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JournalStatus {
    Ok,
    Failed,
}

/// One journal line. Timestamps live in their own field so that identity
/// comparisons can exclude them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JournalEntry {
    pub prompt_hash: String,
    pub kind: OutputKind,
    pub payload: serde_json::Value,
    pub status: JournalStatus,
    pub attempt: u32,
    pub timestamp: String,
}

fn read_journal(path: &Path) -> Result<Vec<JournalEntry>, ModelIoError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = fs::File::open(path)?;
    let mut entries = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str(&line)?);
    }
    Ok(entries)
}

/// A unit of endpoint work.
#[derive(Debug, Clone)]
pub struct PromptJob {
    /// Cue or question id, carried into the journal payload.
    pub id: String,
    pub kind: OutputKind,
    pub prompt: String,
    /// Only used for option-score jobs.
    pub option_symbols: Vec<String>,
}

/// Batch collection outcome.
#[derive(Debug)]
pub struct CollectOutcome {
    pub generations: Vec<GenerationRecord>,
    pub option_scores: Vec<OptionScoreRecord>,
    /// Job ids that exhausted their retries.
    pub failed: Vec<String>,
    /// Jobs skipped because the journal already holds a successful entry.
    pub skipped: usize,
}

struct HttpWorker {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
    config: EndpointConfig,
}

impl HttpWorker {
    fn new(config: &EndpointConfig) -> Result<Self, ModelIoError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .no_proxy()
            .build()
            .map_err(|e| ModelIoError::Http(e.to_string()))?;
        let url = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
        Ok(HttpWorker {
            client,
            url,
            api_key: config.api_key()?,
            config: config.clone(),
        })
    }

    fn post(&self, body: &serde_json::Value) -> Result<serde_json::Value, ModelIoError> {
        let mut request = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| ModelIoError::Http(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Err(ModelIoError::Http(format!("status {status}: {text}")));
        }
        response
            .json()
            .map_err(|e| ModelIoError::Http(format!("bad response body: {e}")))
    }

    /// POST with retries per the configured policy.
    fn post_with_retries(
        &self,
        body: &serde_json::Value,
    ) -> (Result<serde_json::Value, ModelIoError>, u32) {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.post(body) {
                Ok(v) => return (Ok(v), attempt),
                Err(e) => {
                    if attempt > self.config.retry.max_retries {
                        return (Err(e), attempt);
                    }
                    let backoff = self.config.retry.initial_backoff_ms << (attempt - 1).min(16);
                    std::thread::sleep(Duration::from_millis(backoff));
                }
            }
        }
    }

    fn generation_body(&self, prompt: &str) -> serde_json::Value {
        json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        })
    }

    fn option_score_body(&self, prompt: &str) -> serde_json::Value {
        json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": 1,
            "logprobs": true,
            "top_logprobs": self.config.top_logprobs,
        })
    }
}

fn response_text(body: &serde_json::Value) -> Result<String, ModelIoError> {
    body.pointer("/choices/0/message/content")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| ModelIoError::Http("response lacks choices[0].message.content".to_string()))
}

/// Pull per-token alternatives from the first generated position.
fn extract_option_logprobs(
    body: &serde_json::Value,
    option_symbols: &[String],
) -> Result<(Vec<f64>, Vec<String>), ModelIoError> {
    let alternatives = body
        .pointer("/choices/0/logprobs/content/0/top_logprobs")
        .and_then(|v| v.as_array())
        .ok_or_else(|| {
            ModelIoError::Capability(
                "endpoint did not return token logprobs; enable logprobs support".to_string(),
            )
        })?;
    let mut by_token: HashMap<String, f64> = HashMap::new();
    for alt in alternatives {
        let Some(token) = alt.get("token").and_then(|t| t.as_str()) else {
            continue;
        };
        let Some(logprob) = alt.get("logprob").and_then(|l| l.as_f64()) else {
            continue;
        };
        let key = token.trim().to_string();
        by_token
            .entry(key)
            .and_modify(|v| *v = v.max(logprob))
            .or_insert(logprob);
    }
    let mut scores = Vec::with_capacity(option_symbols.len());
    let mut flags = Vec::new();
    for symbol in option_symbols {
        match by_token.get(symbol.trim()) {
            Some(&lp) => scores.push(lp),
            None => {
                scores.push(f64::NEG_INFINITY);
                flags.push(format!("option '{symbol}' absent from top logprobs"));
            }
        }
    }
    Ok((scores, flags))
}

/// Collect one option-score record for a single question prompt.
pub fn collect_option_scores(
    config: &EndpointConfig,
    question_id: &str,
    option_symbols: &[String],
    prompt: &str,
) -> Result<(OptionScoreRecord, Vec<String>), ModelIoError> {
    config.validate()?;
    let worker = HttpWorker::new(config)?;
    let (result, _) = worker.post_with_retries(&worker.option_score_body(prompt));
    let body = result?;
    let (log_scores, flags) = extract_option_logprobs(&body, option_symbols)?;
    Ok((
        OptionScoreRecord {
            question_id: question_id.to_string(),
            option_symbols: option_symbols.to_vec(),
            log_scores,
            model_name: config.model_name.clone(),
        },
        flags,
    ))
}

fn record_from_payload(kind: OutputKind, payload: &serde_json::Value) -> Option<GenerationRecord> {
    let cue = payload.get("cue")?.as_str()?.to_string();
    let raw_text = payload.get("responseText")?.as_str()?.to_string();
    let words = match kind {
        OutputKind::Ranking => parse_ranked_response(&raw_text).ordered_words,
        _ => split_generated_words(&raw_text),
    };
    Some(GenerationRecord {
        cue,
        words,
        model_name: payload
            .get("modelName")
            .and_then(|v| v.as_str())
            .unwrap_or_default()
            .to_string(),
        prompt_hash: payload
            .get("promptHash")
            .and_then(|v| v.as_str())
            .unwrap_or_default()
            .to_string(),
        raw_text,
    })
}

fn option_record_from_payload(payload: &serde_json::Value) -> Option<OptionScoreRecord> {
    serde_json::from_value(payload.clone()).ok()
}

/// Run every job not already journaled as successful, with bounded
/// concurrency and a single serialized journal writer. Results from prior
/// runs are folded into the outcome, so a rerun over the same jobs is a
/// no-op that returns the full record set.
pub fn collect(
    config: &EndpointConfig,
    jobs: &[PromptJob],
    journal_path: &Path,
) -> Result<CollectOutcome, ModelIoError> {
    config.validate()?;
    if let Some(parent) = journal_path.parent() {
        fs::create_dir_all(parent)?;
    }
    let existing = read_journal(journal_path)?;
    let done: HashSet<String> = existing
        .iter()
        .filter(|e| e.status == JournalStatus::Ok)
        .map(|e| e.prompt_hash.clone())
        .collect();

    let pending: Vec<(usize, &PromptJob)> = jobs
        .iter()
        .enumerate()
        .filter(|(_, j)| !done.contains(&prompt_hash(&j.prompt)))
        .collect();
    let skipped = jobs.len() - pending.len();

    let mut journal = OpenOptions::new()
        .create(true)
        .append(true)
        .open(journal_path)?;

    let mut new_entries: Vec<JournalEntry> = Vec::new();
    if !pending.is_empty() {
        let worker = Arc::new(HttpWorker::new(config)?);
        let queue: Arc<Mutex<std::collections::VecDeque<(usize, PromptJob)>>> = Arc::new(
            Mutex::new(pending.iter().map(|(i, j)| (*i, (*j).clone())).collect()),
        );
        let (sender, receiver) = mpsc::channel::<(usize, JournalEntry)>();
        let thread_count = config.max_concurrent_requests.min(pending.len());
        let mut handles = Vec::new();
        for _ in 0..thread_count {
            let queue = Arc::clone(&queue);
            let sender = sender.clone();
            let worker = Arc::clone(&worker);
            let model_name = config.model_name.clone();
            handles.push(std::thread::spawn(move || loop {
                let job = queue.lock().expect("queue lock").pop_front();
                let Some((index, job)) = job else { break };
                let hash = prompt_hash(&job.prompt);
                let entry = match job.kind {
                    OutputKind::OptionScores => {
                        let (result, attempt) =
                            worker.post_with_retries(&worker.option_score_body(&job.prompt));
                        match result
                            .and_then(|body| extract_option_logprobs(&body, &job.option_symbols))
                        {
                            Ok((scores, flags)) => {
                                let record = OptionScoreRecord {
                                    question_id: job.id.clone(),
                                    option_symbols: job.option_symbols.clone(),
                                    log_scores: scores,
                                    model_name: model_name.clone(),
                                };
                                let mut payload =
                                    serde_json::to_value(&record).expect("record serializes");
                                payload["flags"] = json!(flags);
                                JournalEntry {
                                    prompt_hash: hash,
                                    kind: job.kind,
                                    payload,
                                    status: JournalStatus::Ok,
                                    attempt,
                                    timestamp: chrono::Utc::now().to_rfc3339(),
                                }
                            }
                            Err(e) => JournalEntry {
                                prompt_hash: hash,
                                kind: job.kind,
                                payload: json!({"cue": job.id, "error": e.to_string()}),
                                status: JournalStatus::Failed,
                                attempt,
                                timestamp: chrono::Utc::now().to_rfc3339(),
                            },
                        }
                    }
                    _ => {
                        let (result, attempt) =
                            worker.post_with_retries(&worker.generation_body(&job.prompt));
                        match result.and_then(|body| response_text(&body)) {
                            Ok(text) => JournalEntry {
                                prompt_hash: hash.clone(),
                                kind: job.kind,
                                payload: json!({
                                    "cue": job.id,
                                    "responseText": text,
                                    "modelName": model_name,
                                    "promptHash": hash,
                                }),
                                status: JournalStatus::Ok,
                                attempt,
                                timestamp: chrono::Utc::now().to_rfc3339(),
                            },
                            Err(e) => JournalEntry {
                                prompt_hash: hash,
                                kind: job.kind,
                                payload: json!({"cue": job.id, "error": e.to_string()}),
                                status: JournalStatus::Failed,
                                attempt,
                                timestamp: chrono::Utc::now().to_rfc3339(),
                            },
                        }
                    }
                };
                if sender.send((index, entry)).is_err() {
                    break;
                }
            }));
        }
        drop(sender);

        // persist each entry as it arrives so an interrupted run keeps its
        // completed work and resumes from the journal
        let mut received: Vec<(usize, JournalEntry)> = Vec::new();
        for (index, entry) in receiver.iter() {
            writeln!(journal, "{}", serde_json::to_string(&entry)?)?;
            journal.flush()?;
            received.push((index, entry));
        }
        for handle in handles {
            let _ = handle.join();
        }
        // fold results back in job order
        received.sort_by_key(|(i, _)| *i);
        new_entries.extend(received.into_iter().map(|(_, e)| e));
    }

    let ok_hashes: HashSet<&str> = existing
        .iter()
        .chain(new_entries.iter())
        .filter(|e| e.status == JournalStatus::Ok)
        .map(|e| e.prompt_hash.as_str())
        .collect();
    let mut generations = Vec::new();
    let mut option_scores = Vec::new();
    let mut failed = Vec::new();
    for entry in existing.iter().chain(new_entries.iter()) {
        match entry.status {
            JournalStatus::Ok => match entry.kind {
                OutputKind::OptionScores => {
                    if let Some(r) = option_record_from_payload(&entry.payload) {
                        option_scores.push(r);
                    }
                }
                kind => {
                    if let Some(r) = record_from_payload(kind, &entry.payload) {
                        generations.push(r);
                    }
                }
            },
            // a later retry may have succeeded; only report dead jobs
            JournalStatus::Failed if !ok_hashes.contains(entry.prompt_hash.as_str()) => {
                if let Some(id) = entry.payload.get("cue").and_then(|v| v.as_str()) {
                    failed.push(id.to_string());
                }
            }
            JournalStatus::Failed => {}
        }
    }

    Ok(CollectOutcome {
        generations,
        option_scores,
        failed,
        skipped,
    })
}

/// Write records as a JSON-lines outputs file compatible with the readers.
pub fn write_generation_outputs<W: Write>(
    records: &[GenerationRecord],
    mut w: W,
) -> Result<(), ModelIoError> {
    for record in records {
        writeln!(w, "{}", serde_json::to_string(record)?)?;
    }
    Ok(())
}

pub fn write_option_score_outputs<W: Write>(
    records: &[OptionScoreRecord],
    mut w: W,
) -> Result<(), ModelIoError> {
    for record in records {
        writeln!(w, "{}", serde_json::to_string(record)?)?;
    }
    Ok(())
}
