//! Client for a remote service that serves next-token log-probabilities.
//!
//! Protocol (JSON over HTTP):
//!
//! * `GET  /v1/model`      -> `{"vocab_size": n, "model_id": "..."}`
//! * `POST /v1/logprobs`   `{"context": [ids], "request_id": "..."}` -> `{"logprobs": [n floats], "request_id": "..."}`
//! * `POST /v1/tokenize`   `{"text": "..."}` -> `{"tokens": [ids]}`
//! * `POST /v1/detokenize` `{"tokens": [ids]}` -> `{"text": "..."}`
//!
//! Errors come back as non-200 responses carrying `{"error": "..."}`. All calls
//! are idempotent; transport failures, 429 and 5xx responses are retried with
//! exponential backoff.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use dino_core::{Distribution, LanguageModel, LmContext, LmError, TokenId, Tokenized};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Allowed deviation from 1 of the renormalized probability mass.
pub const RENORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub timeout_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "http://127.0.0.1:8080".into(),
            max_retries: 3,
            retry_backoff_ms: 200,
            timeout_ms: 60_000,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ModelInfo {
    vocab_size: usize,
    model_id: String,
}

#[derive(Serialize)]
struct LogprobsRequest<'a> {
    context: &'a [TokenId],
    request_id: &'a str,
}

#[derive(Deserialize)]
struct LogprobsResponse {
    logprobs: Vec<Option<f64>>,
    request_id: String,
}

#[derive(Serialize)]
struct TokenizeRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct TokenizeResponse {
    tokens: Vec<TokenId>,
}

#[derive(Serialize)]
struct DetokenizeRequest<'a> {
    tokens: &'a [TokenId],
}

#[derive(Deserialize)]
struct DetokenizeResponse {
    text: String,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

pub struct RemoteLm {
    agent: ureq::Agent,
    config: RemoteConfig,
    vocab_size: usize,
    model_id: String,
    next_request: AtomicU64,
    token_texts: Mutex<HashMap<TokenId, String>>,
    calls: AtomicU64,
}

impl std::fmt::Debug for RemoteLm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteLm")
            .field("endpoint", &self.config.endpoint)
            .field("model_id", &self.model_id)
            .field("vocab_size", &self.vocab_size)
            .finish()
    }
}

impl RemoteLm {
    /// Connects and performs the `/v1/model` handshake.
    pub fn connect(config: RemoteConfig) -> Result<Self, LmError> {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        let mut lm = RemoteLm {
            agent,
            config,
            vocab_size: 0,
            model_id: String::new(),
            next_request: AtomicU64::new(0),
            token_texts: Mutex::new(HashMap::new()),
            calls: AtomicU64::new(0),
        };
        let info: ModelInfo = lm.call("/v1/model", None::<&()>, 0)?;
        if info.vocab_size == 0 {
            return Err(LmError::Protocol(
                "server reported an empty vocabulary".into(),
            ));
        }
        lm.vocab_size = info.vocab_size;
        lm.model_id = info.model_id;
        Ok(lm)
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    /// HTTP requests issued so far, retries included.
    pub fn requests_sent(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    fn call<B: Serialize, R: DeserializeOwned>(
        &self,
        path: &str,
        body: Option<&B>,
        context_hash: u64,
    ) -> Result<R, LmError> {
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let wait = self
                    .config
                    .retry_backoff_ms
                    .saturating_mul(1 << (attempt - 1).min(16));
                log::debug!("retrying {path} in {wait} ms after: {last}");
                thread::sleep(Duration::from_millis(wait));
            }
            match self.send(path, body) {
                Ok(text) => {
                    return serde_json::from_str(&text)
                        .map_err(|e| LmError::Protocol(format!("{path}: malformed response: {e}")))
                }
                Err(Failure::Fatal(message)) => return Err(LmError::Protocol(message)),
                Err(Failure::Retryable(message)) => last = message,
            }
        }
        Err(LmError::Transport {
            context_hash,
            message: format!(
                "{path} failed after {} attempts: {last}",
                self.config.max_retries + 1
            ),
        })
    }

    fn send<B: Serialize>(&self, path: &str, body: Option<&B>) -> Result<String, Failure> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let url = self.url(path);
        let result = match body {
            Some(b) => self.agent.post(&url).send_json(b),
            None => self.agent.get(&url).call(),
        };
        match result {
            Ok(resp) => resp
                .into_string()
                .map_err(|e| Failure::Retryable(format!("reading body: {e}"))),
            Err(ureq::Error::Status(code, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                let message = serde_json::from_str::<ErrorBody>(&body)
                    .map(|b| b.error)
                    .unwrap_or(body);
                let message = format!("{path}: HTTP {code}: {message}");
                if code == 429 || code >= 500 {
                    Err(Failure::Retryable(message))
                } else {
                    Err(Failure::Fatal(message))
                }
            }
            Err(e) => Err(Failure::Retryable(format!("{path}: {e}"))),
        }
    }

    fn check_tokens(&self, tokens: &[TokenId]) -> Result<(), LmError> {
        match tokens.iter().find(|t| t.index() >= self.vocab_size) {
            Some(&token) => Err(LmError::InvalidToken {
                token,
                vocab_size: self.vocab_size,
            }),
            None => Ok(()),
        }
    }
}

/// Exponentiates log-probabilities and renormalizes them. `null` entries
/// stand for negative infinity.
pub fn logprobs_to_distribution(logprobs: &[Option<f64>]) -> Result<Distribution, LmError> {
    if let Some(bad) = logprobs
        .iter()
        .flatten()
        .find(|v| v.is_nan() || **v == f64::INFINITY)
    {
        return Err(LmError::Protocol(format!("invalid log-probability {bad}")));
    }
    let max = logprobs
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(LmError::Protocol("all log-probabilities are -inf".into()));
    }
    let weights: Vec<f64> = logprobs
        .iter()
        .map(|v| v.map_or(0.0, |lp| (lp - max).exp()))
        .collect();
    let dist = Distribution::from_weights(weights)?;
    let total = dist.total();
    if (total - 1.0).abs() > RENORMALIZATION_TOLERANCE {
        return Err(LmError::Protocol(format!(
            "renormalized mass {total} is not 1"
        )));
    }
    Ok(dist)
}

impl LanguageModel for RemoteLm {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_token_distribution(&self, context: &LmContext) -> Result<Distribution, LmError> {
        self.check_tokens(context.tokens())?;
        let hash = context.fingerprint();
        let request_id = format!(
            "{hash:016x}-{}",
            self.next_request.fetch_add(1, Ordering::Relaxed)
        );
        let response: LogprobsResponse = self.call(
            "/v1/logprobs",
            Some(&LogprobsRequest {
                context: context.tokens(),
                request_id: &request_id,
            }),
            hash,
        )?;
        if response.request_id != request_id {
            return Err(LmError::Protocol(format!(
                "response id {} does not match request {request_id}",
                response.request_id
            )));
        }
        if response.logprobs.len() != self.vocab_size {
            return Err(LmError::VocabMismatch {
                expected: self.vocab_size,
                actual: response.logprobs.len(),
            });
        }
        logprobs_to_distribution(&response.logprobs)
    }

    fn tokenize(&self, text: &str) -> Result<Tokenized, LmError> {
        let response: TokenizeResponse =
            self.call("/v1/tokenize", Some(&TokenizeRequest { text }), 0)?;
        self.check_tokens(&response.tokens)?;
        let lossless = self.decode(&response.tokens)? == text;
        Ok(Tokenized {
            ids: response.tokens,
            lossless,
        })
    }

    fn decode(&self, tokens: &[TokenId]) -> Result<String, LmError> {
        self.check_tokens(tokens)?;
        let response: DetokenizeResponse =
            self.call("/v1/detokenize", Some(&DetokenizeRequest { tokens }), 0)?;
        Ok(response.text)
    }

    fn token_text(&self, token: TokenId) -> Result<String, LmError> {
        if let Some(text) = self.token_texts.lock().unwrap().get(&token) {
            return Ok(text.clone());
        }
        let text = self.decode(&[token])?;
        self.token_texts.lock().unwrap().insert(token, text.clone());
        Ok(text)
    }
}
