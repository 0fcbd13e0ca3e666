//! Judge transports: live HTTP chat-completion, deterministic mock, and a
//! scripted double for retry tests.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// One outgoing scoring call. `attempt` is 1-based and increments across
/// parse retries of the same prompt; live transports ignore it.
#[derive(Debug, Clone)]
pub struct CompletionRequest<'a> {
    pub model_id: &'a str,
    pub prompt: &'a str,
    pub attempt: u32,
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("network error: {0}")]
    Network(String),
    #[error("timeout: {0}")]
    Timeout(String),
    #[error("HTTP {status}: {message}")]
    Http { status: u16, message: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("blinding violation at transport boundary: {0}")]
    BlindingViolation(String),
    #[error("transport aborted: {0}")]
    Aborted(String),
}

impl TransportError {
    /// Transient failures are retried under the transport retry policy;
    /// everything else surfaces immediately.
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Network(_) | TransportError::Timeout(_) => true,
            TransportError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// A judge callable: takes one rendered prompt, returns raw model text.
pub trait JudgeTransport: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, TransportError>;
}

/// Wraps any transport and refuses to send a prompt containing a blocklist
/// substring. Renders are already checked; this is the boundary assertion.
pub struct GuardedTransport<'a> {
    inner: &'a dyn JudgeTransport,
    blocklist: &'a [String],
}

impl<'a> GuardedTransport<'a> {
    pub fn new(inner: &'a dyn JudgeTransport, blocklist: &'a [String]) -> Self {
        Self { inner, blocklist }
    }
}

impl JudgeTransport for GuardedTransport<'_> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, TransportError> {
        let violations = crate::rubric::check_blinding(request.prompt, self.blocklist);
        if let Some(first) = violations.first() {
            return Err(TransportError::BlindingViolation(format!(
                "\"{}\" at offset {}",
                first.substring, first.offset
            )));
        }
        self.inner.complete(request)
    }
}

/// Deterministic mock judge.
///
/// Every call derives its randomness from `(seed, model_id, prompt, attempt)`
/// so the same request yields the same text regardless of call order or
/// interleaving. Group-conditional scoring can only be driven by marker
/// substrings planted in the prompt text itself, which keeps the blinding
/// contract intact in tests.
pub struct MockJudge {
    seed: u64,
    parse_failure_rate: f64,
    bias: Vec<(String, [f64; 5])>,
    default_weights: [f64; 5],
}

impl MockJudge {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            parse_failure_rate: 0.0,
            bias: Vec::new(),
            default_weights: [1.0, 1.0, 1.0, 1.0, 1.0],
        }
    }

    /// Probability that any single attempt returns unparsable text.
    pub fn with_parse_failure_rate(mut self, rate: f64) -> Self {
        self.parse_failure_rate = rate.clamp(0.0, 1.0);
        self
    }

    /// When `marker` occurs in the prompt, draw the score from `weights`
    /// (indexed by score 1..=5). First matching marker wins.
    pub fn with_bias(mut self, marker: &str, weights: [f64; 5]) -> Self {
        self.bias.push((marker.to_string(), weights));
        self
    }

    pub fn with_default_weights(mut self, weights: [f64; 5]) -> Self {
        self.default_weights = weights;
        self
    }

    fn rng_for(&self, request: &CompletionRequest) -> ChaCha20Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update([0x1f]);
        hasher.update(request.model_id.as_bytes());
        hasher.update([0x1f]);
        hasher.update(request.prompt.as_bytes());
        hasher.update([0x1f]);
        hasher.update(request.attempt.to_le_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha20Rng::from_seed(seed)
    }

    fn draw_score(&self, prompt: &str, rng: &mut ChaCha20Rng) -> u8 {
        let weights = self
            .bias
            .iter()
            .find(|(marker, _)| prompt.contains(marker.as_str()))
            .map(|(_, w)| w)
            .unwrap_or(&self.default_weights);
        let total: f64 = weights.iter().sum();
        let mut pick = rng.gen::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            pick -= w;
            if pick <= 0.0 {
                return (i + 1) as u8;
            }
        }
        5
    }
}

impl JudgeTransport for MockJudge {
    fn complete(&self, request: &CompletionRequest) -> Result<String, TransportError> {
        let mut rng = self.rng_for(request);
        if rng.gen::<f64>() < self.parse_failure_rate {
            return Ok(format!(
                "I am unable to respond in the requested format right now (attempt {}).",
                request.attempt
            ));
        }
        // Reversal-test prompts ask for a holds/collapses verdict instead of
        // a score; answering them keeps judge-mode density fully offline.
        if request.prompt.contains("\"verdict\"") {
            let verdict = if rng.gen::<f64>() < 0.65 {
                "collapses"
            } else {
                "holds"
            };
            let tag: u32 = rng.gen();
            return Ok(format!(
                "{{\"verdict\": \"{verdict}\", \"rationale\": \"mock reversal {tag:08x}\"}}"
            ));
        }
        let score = self.draw_score(request.prompt, &mut rng);
        let tag: u32 = rng.gen();
        Ok(format!(
            "{{\"score\": {score}, \"rationale\": \"mock verdict {tag:08x}\"}}"
        ))
    }
}

/// Replays a fixed sequence of responses; used to script failure patterns.
pub struct ScriptedTransport {
    script: Mutex<VecDeque<Result<String, TransportError>>>,
}

impl ScriptedTransport {
    pub fn new(responses: Vec<Result<String, TransportError>>) -> Self {
        Self {
            script: Mutex::new(responses.into()),
        }
    }

    pub fn of_texts(texts: &[&str]) -> Self {
        Self::new(texts.iter().map(|t| Ok(t.to_string())).collect())
    }
}

impl JudgeTransport for ScriptedTransport {
    fn complete(&self, _request: &CompletionRequest) -> Result<String, TransportError> {
        self.script
            .lock()
            .expect("script lock")
            .pop_front()
            .unwrap_or_else(|| Err(TransportError::Aborted("script exhausted".to_string())))
    }
}

/// Live chat-completion transport: a minimal POST of
/// `{model, messages:[{role:"user", content}], ...params}` to `base_url`,
/// reading `choices[0].message.content` back.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    base_url: String,
    bearer_token: Option<String>,
    params: Map<String, Value>,
}

impl HttpTransport {
    /// `params` are decoding options merged into every request body; a
    /// `temperature` of 0 is supplied when absent.
    pub fn new(
        base_url: &str,
        bearer_token: Option<String>,
        timeout: Duration,
        params: Map<String, Value>,
    ) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(Self {
            client,
            base_url: base_url.to_string(),
            bearer_token,
            params,
        })
    }
}

impl JudgeTransport for HttpTransport {
    fn complete(&self, request: &CompletionRequest) -> Result<String, TransportError> {
        let mut body = Map::new();
        body.insert("model".into(), Value::String(request.model_id.to_string()));
        body.insert(
            "messages".into(),
            json!([{ "role": "user", "content": request.prompt }]),
        );
        body.insert("temperature".into(), json!(0.0));
        for (k, v) in &self.params {
            body.insert(k.clone(), v.clone());
        }

        let mut req = self.client.post(&self.base_url).json(&Value::Object(body));
        if let Some(token) = &self.bearer_token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout(e.to_string())
            } else {
                TransportError::Network(e.to_string())
            }
        })?;

        let status = resp.status().as_u16();
        if status == 401 || status == 403 {
            return Err(TransportError::Auth(format!("HTTP {status}")));
        }
        if status != 200 {
            let message = resp.text().unwrap_or_default();
            let message = message.chars().take(300).collect();
            return Err(TransportError::Http { status, message });
        }
        let payload: Value = resp
            .json()
            .map_err(|e| TransportError::Protocol(format!("response is not JSON: {e}")))?;
        payload["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.to_string())
            .ok_or_else(|| {
                TransportError::Protocol("missing choices[0].message.content".to_string())
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req<'a>(model: &'a str, prompt: &'a str, attempt: u32) -> CompletionRequest<'a> {
        CompletionRequest {
            model_id: model,
            prompt,
            attempt,
        }
    }

    #[test]
    fn mock_is_deterministic_per_request() {
        let mock = MockJudge::new(42);
        let a = mock.complete(&req("m1", "prompt text", 1)).unwrap();
        let b = mock.complete(&req("m1", "prompt text", 1)).unwrap();
        assert_eq!(a, b);
        let c = mock.complete(&req("m2", "prompt text", 1)).unwrap();
        let d = mock.complete(&req("m1", "prompt text", 2)).unwrap();
        assert!(a != c || a != d, "model and attempt must enter the draw");
    }

    #[test]
    fn mock_bias_markers_steer_scores() {
        let mock = MockJudge::new(7)
            .with_bias("quality-high", [0.0, 0.0, 0.0, 0.2, 0.8])
            .with_bias("quality-low", [0.8, 0.2, 0.0, 0.0, 0.0]);
        for i in 0..30 {
            let text = mock
                .complete(&req("m", &format!("quality-high sample {i}"), 1))
                .unwrap();
            let v: Value = serde_json::from_str(&text).unwrap();
            assert!(v["score"].as_i64().unwrap() >= 4);
            let text = mock
                .complete(&req("m", &format!("quality-low sample {i}"), 1))
                .unwrap();
            let v: Value = serde_json::from_str(&text).unwrap();
            assert!(v["score"].as_i64().unwrap() <= 2);
        }
    }

    #[test]
    fn mock_failure_rate_one_always_garbles() {
        let mock = MockJudge::new(3).with_parse_failure_rate(1.0);
        for attempt in 1..=4 {
            let text = mock.complete(&req("m", "p", attempt)).unwrap();
            assert!(serde_json::from_str::<Value>(&text).is_err());
        }
    }

    #[test]
    fn guarded_transport_blocks_leaky_prompt() {
        let mock = MockJudge::new(1);
        let blocklist = vec!["Group A".to_string()];
        let guarded = GuardedTransport::new(&mock, &blocklist);
        let err = guarded
            .complete(&req("m", "this mentions Group A openly", 1))
            .unwrap_err();
        assert!(matches!(err, TransportError::BlindingViolation(_)));
        assert!(guarded.complete(&req("m", "clean prompt", 1)).is_ok());
    }

    #[test]
    fn scripted_transport_replays_then_aborts() {
        let t = ScriptedTransport::of_texts(&["one", "two"]);
        assert_eq!(t.complete(&req("m", "p", 1)).unwrap(), "one");
        assert_eq!(t.complete(&req("m", "p", 2)).unwrap(), "two");
        assert!(matches!(
            t.complete(&req("m", "p", 3)),
            Err(TransportError::Aborted(_))
        ));
    }

    #[test]
    fn retryable_classification() {
        assert!(TransportError::Network("x".into()).is_retryable());
        assert!(TransportError::Timeout("x".into()).is_retryable());
        assert!(TransportError::Http {
            status: 503,
            message: String::new()
        }
        .is_retryable());
        assert!(!TransportError::Http {
            status: 400,
            message: String::new()
        }
        .is_retryable());
        assert!(!TransportError::Auth("x".into()).is_retryable());
        assert!(!TransportError::BlindingViolation("x".into()).is_retryable());
    }
}
