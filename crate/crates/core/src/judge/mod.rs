//! Blinded rubric scoring against judge models.
//!
//! A scoring *cell* is one `(sample, dimension, model)` triple. Cells are
//! resolved by sending the rendered single-dimension prompt to a transport,
//! parsing the first JSON object out of the reply, and retrying a bounded
//! number of times on unparsable output before recording a MISSING verdict.
//! Verdicts land in append-only per-`(model, dimension)` archives, which
//! makes interrupted batches resumable: a cell whose stored `prompt_hash`
//! still matches is never re-sent.

pub mod store;
pub mod transport;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::rubric::{render_scoring_prompt, Rubric, RubricError, ScoringPrompt};
use store::{check_label, StoreError, VerdictStore};
use transport::{CompletionRequest, GuardedTransport, JudgeTransport, TransportError};

/// One judge model under a stable short label used in file names and tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeEndpoint {
    pub label: String,
    pub model_id: String,
    /// Parse retries after the initial attempt; total attempts are
    /// `max_parse_retries + 1`.
    #[serde(default = "default_parse_retries")]
    pub max_parse_retries: u32,
}

fn default_parse_retries() -> u32 {
    3
}

impl JudgeEndpoint {
    pub fn new(label: &str, model_id: &str) -> Self {
        Self {
            label: label.to_string(),
            model_id: model_id.to_string(),
            max_parse_retries: default_parse_retries(),
        }
    }
}

/// A rubric score, or the MISSING sentinel for a cell whose replies never
/// parsed. Serialized as the integer or the string `"MISSING"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Score {
    Value(u8),
    Missing,
}

impl Score {
    pub fn value(&self) -> Option<u8> {
        match self {
            Score::Value(v) => Some(*v),
            Score::Missing => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Score::Missing)
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Score::Value(v) => serializer.serialize_u8(*v),
            Score::Missing => serializer.serialize_str("MISSING"),
        }
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = serde_json::Value::deserialize(deserializer)?;
        match raw {
            serde_json::Value::Number(n) => {
                let v = n
                    .as_u64()
                    .filter(|v| (1..=5).contains(v))
                    .ok_or_else(|| D::Error::custom(format!("score out of range: {n}")))?;
                Ok(Score::Value(v as u8))
            }
            serde_json::Value::String(s) if s == "MISSING" => Ok(Score::Missing),
            other => Err(D::Error::custom(format!("invalid score: {other}"))),
        }
    }
}

/// The durable record of one resolved cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub sample_id: String,
    pub dim_id: String,
    pub model_label: String,
    pub score: Score,
    pub rationale: String,
    /// Attempts consumed: the successful attempt number, or
    /// `max_parse_retries + 1` for a MISSING verdict.
    pub attempts: u32,
    /// Hash of the exact prompt text this verdict answered.
    pub prompt_hash: String,
    pub timestamp: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseVerdictError {
    #[error("no JSON object found in reply")]
    NoJsonObject,
    #[error("missing key \"{0}\" in reply object")]
    MissingKey(&'static str),
    #[error("score is not an integer")]
    ScoreNotInteger,
    #[error("score {0} outside 1..=5")]
    ScoreOutOfRange(i64),
}

/// Extracts the first well-formed JSON object embedded in `text` and reads
/// `score` (an integer 1..=5; integer-valued floats like `4.0` are accepted)
/// and `rationale` (a string; any other JSON value is kept as its serialized
/// text). Judges that wrap the object in prose or code fences still parse.
pub fn parse_verdict(text: &str) -> Result<(u8, String), ParseVerdictError> {
    let object = first_json_object(text).ok_or(ParseVerdictError::NoJsonObject)?;
    let score_field = object
        .get("score")
        .ok_or(ParseVerdictError::MissingKey("score"))?;
    let score = match score_field {
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i
            } else if let Some(f) = n.as_f64() {
                if f.fract() == 0.0 {
                    f as i64
                } else {
                    return Err(ParseVerdictError::ScoreNotInteger);
                }
            } else {
                return Err(ParseVerdictError::ScoreNotInteger);
            }
        }
        _ => return Err(ParseVerdictError::ScoreNotInteger),
    };
    if !(1..=5).contains(&score) {
        return Err(ParseVerdictError::ScoreOutOfRange(score));
    }
    let rationale = match object.get("rationale") {
        None => return Err(ParseVerdictError::MissingKey("rationale")),
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    };
    Ok((score as u8, rationale))
}

/// Scans for the first balanced `{...}` span that parses as a JSON object.
/// Braces inside string literals are ignored via a string/escape state
/// machine; all scanned delimiters are ASCII so byte indexing is safe.
pub(crate) fn first_json_object(text: &str) -> Option<serde_json::Map<String, serde_json::Value>> {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(offset) = bytes[start..].iter().position(|&b| b == b'{') {
        let open = start + offset;
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        let mut end = None;
        for (j, &b) in bytes[open..].iter().enumerate() {
            if in_string {
                if escaped {
                    escaped = false;
                } else if b == b'\\' {
                    escaped = true;
                } else if b == b'"' {
                    in_string = false;
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(open + j);
                        break;
                    }
                }
                _ => {}
            }
        }
        if let Some(end) = end {
            if let Ok(serde_json::Value::Object(map)) = serde_json::from_str(&text[open..=end]) {
                return Some(map);
            }
        }
        start = open + 1;
    }
    None
}

/// Retry policy for *transport* failures (network, timeout, 429/5xx) — a
/// separate budget from parse retries. Delays double from `base_delay`.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    /// Zero-delay policy for tests and mock runs.
    pub fn immediate() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::ZERO,
        }
    }
}

pub(crate) fn complete_with_retry(
    transport: &dyn JudgeTransport,
    request: &CompletionRequest,
    policy: &RetryPolicy,
) -> Result<String, TransportError> {
    let attempts = policy.max_attempts.max(1);
    let mut last = None;
    for attempt in 0..attempts {
        match transport.complete(request) {
            Ok(text) => return Ok(text),
            Err(e) if e.is_retryable() && attempt + 1 < attempts => {
                let delay = policy.base_delay * 2u32.pow(attempt);
                if !delay.is_zero() {
                    std::thread::sleep(delay);
                }
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

pub(crate) fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Resolves one cell: up to `max_parse_retries + 1` prompt attempts, each a
/// fresh transport call, falling back to a MISSING verdict when every reply
/// was unparsable. Transport-level failures abort the cell instead (they are
/// an availability problem, not a data signal).
pub fn evaluate_one(
    prompt: &ScoringPrompt,
    endpoint: &JudgeEndpoint,
    transport: &dyn JudgeTransport,
    policy: &RetryPolicy,
) -> Result<JudgeVerdict, TransportError> {
    let max_attempts = endpoint.max_parse_retries + 1;
    let mut last_parse_error = ParseVerdictError::NoJsonObject;
    for attempt in 1..=max_attempts {
        let request = CompletionRequest {
            model_id: &endpoint.model_id,
            prompt: &prompt.rendered_text,
            attempt,
        };
        let text = complete_with_retry(transport, &request, policy)?;
        match parse_verdict(&text) {
            Ok((score, rationale)) => {
                return Ok(JudgeVerdict {
                    sample_id: prompt.sample_id.clone(),
                    dim_id: prompt.dim_id.clone(),
                    model_label: endpoint.label.clone(),
                    score: Score::Value(score),
                    rationale,
                    attempts: attempt,
                    prompt_hash: prompt.content_hash.clone(),
                    timestamp: now_rfc3339(),
                });
            }
            Err(e) => last_parse_error = e,
        }
    }
    Ok(JudgeVerdict {
        sample_id: prompt.sample_id.clone(),
        dim_id: prompt.dim_id.clone(),
        model_label: endpoint.label.clone(),
        score: Score::Missing,
        rationale: format!(
            "no parsable verdict after {max_attempts} attempts; last error: {last_parse_error}"
        ),
        attempts: max_attempts,
        prompt_hash: prompt.content_hash.clone(),
        timestamp: now_rfc3339(),
    })
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error(transparent)]
    Render(#[from] RubricError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("duplicate judge label \"{0}\"")]
    DuplicateLabel(String),
    #[error("no judge endpoints configured")]
    NoEndpoints,
    #[error("endpoint count {endpoints} does not match transport count {transports}")]
    TransportMismatch { endpoints: usize, transports: usize },
}

/// Controls for `run_batch`.
#[derive(Debug, Clone)]
pub struct BatchOptions {
    /// Upper bound on in-flight judge calls.
    pub concurrency: usize,
    /// Stop after committing this many new cells (used to exercise
    /// interruption and resume); `None` runs to completion.
    pub max_cells: Option<usize>,
    pub retry: RetryPolicy,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            concurrency: 4,
            max_cells: None,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CellFailure {
    pub sample_id: String,
    pub dim_id: String,
    pub model_label: String,
    pub error: String,
}

/// Outcome counts for one batch invocation.
#[derive(Debug, Clone, Default, Serialize)]
pub struct BatchReport {
    /// Total cells in the plan (samples × dimensions × endpoints).
    pub planned: usize,
    /// Cells skipped because a current verdict already existed.
    pub skipped: usize,
    /// Newly committed verdicts with an integer score.
    pub scored: usize,
    /// Newly committed MISSING verdicts.
    pub missing: usize,
    /// Cells left unresolved by the `max_cells` budget.
    pub deferred: usize,
    /// Cells whose transport failed permanently; not committed, so a rerun
    /// retries them.
    pub failures: Vec<CellFailure>,
}

struct Job<'a> {
    prompt: &'a ScoringPrompt,
    endpoint: &'a JudgeEndpoint,
    transport_idx: usize,
}

/// Scores every `(sample, dimension, endpoint)` cell that lacks a current
/// verdict. Workers run concurrently (at most `options.concurrency` calls in
/// flight) but commits happen on the calling thread in canonical order —
/// endpoint-major, then dimension, then sample — so each archive file grows
/// deterministically and an interrupted run leaves a clean prefix.
///
/// `transports[i]` serves `endpoints[i]`; every call passes through a
/// blinding guard that rejects prompts containing blocklist substrings.
pub fn run_batch(
    corpus: &Corpus,
    rubric: &Rubric,
    endpoints: &[JudgeEndpoint],
    transports: &[&dyn JudgeTransport],
    store: &mut VerdictStore,
    options: &BatchOptions,
) -> Result<BatchReport, JudgeError> {
    if endpoints.is_empty() {
        return Err(JudgeError::NoEndpoints);
    }
    if endpoints.len() != transports.len() {
        return Err(JudgeError::TransportMismatch {
            endpoints: endpoints.len(),
            transports: transports.len(),
        });
    }
    let mut seen = BTreeSet::new();
    for e in endpoints {
        check_label(&e.label)?;
        if !seen.insert(e.label.clone()) {
            return Err(JudgeError::DuplicateLabel(e.label.clone()));
        }
    }
    rubric.validate()?;

    // Render every prompt up front; a blinding leak in any sample aborts the
    // whole batch before a single call is made.
    let mut prompts = Vec::with_capacity(rubric.dimensions.len() * corpus.samples.len());
    for dim in &rubric.dimensions {
        for sample in &corpus.samples {
            prompts.push(render_scoring_prompt(dim, sample, rubric)?);
        }
    }
    let n_samples = corpus.samples.len();

    let mut report = BatchReport {
        planned: endpoints.len() * prompts.len(),
        ..BatchReport::default()
    };

    let mut jobs: Vec<Job> = Vec::new();
    for (ei, endpoint) in endpoints.iter().enumerate() {
        for (di, _dim) in rubric.dimensions.iter().enumerate() {
            for si in 0..n_samples {
                let prompt = &prompts[di * n_samples + si];
                if store.has_current(
                    &prompt.sample_id,
                    &prompt.dim_id,
                    &endpoint.label,
                    &prompt.content_hash,
                ) {
                    report.skipped += 1;
                } else {
                    jobs.push(Job {
                        prompt,
                        endpoint,
                        transport_idx: ei,
                    });
                }
            }
        }
    }

    let budget = options.max_cells.unwrap_or(usize::MAX);
    if jobs.is_empty() || budget == 0 {
        report.deferred = jobs.len();
        return Ok(report);
    }

    let guards: Vec<GuardedTransport> = transports
        .iter()
        .map(|t| GuardedTransport::new(*t, &rubric.blocklist))
        .collect();

    let cursor = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = options.concurrency.max(1).min(jobs.len());
    let (tx, rx) = mpsc::channel::<(usize, Result<JudgeVerdict, TransportError>)>();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let jobs = &jobs;
            let guards = &guards;
            let cursor = &cursor;
            let abort = &abort;
            let retry = &options.retry;
            scope.spawn(move || loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let job = &jobs[i];
                let outcome =
                    evaluate_one(job.prompt, job.endpoint, &guards[job.transport_idx], retry);
                // A send error just means the committer stopped early.
                let _ = tx.send((i, outcome));
            });
        }
        drop(tx);

        let mut pending = std::collections::BTreeMap::new();
        let mut next = 0usize;
        let mut committed = 0usize;
        'commit: while next < jobs.len() {
            match rx.recv() {
                Ok((i, outcome)) => {
                    pending.insert(i, outcome);
                }
                Err(_) => break,
            }
            while let Some(outcome) = pending.remove(&next) {
                match outcome {
                    Ok(verdict) => {
                        let missing = verdict.score.is_missing();
                        store.append(&verdict)?;
                        if missing {
                            report.missing += 1;
                        } else {
                            report.scored += 1;
                        }
                        committed += 1;
                    }
                    Err(e) => {
                        let job = &jobs[next];
                        report.failures.push(CellFailure {
                            sample_id: job.prompt.sample_id.clone(),
                            dim_id: job.prompt.dim_id.clone(),
                            model_label: job.endpoint.label.clone(),
                            error: e.to_string(),
                        });
                    }
                }
                next += 1;
                if committed >= budget {
                    abort.store(true, Ordering::Relaxed);
                    break 'commit;
                }
            }
        }
        report.deferred = jobs.len() - next;
        Ok::<(), JudgeError>(())
    })?;

    Ok(report)
}
