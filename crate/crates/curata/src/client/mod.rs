//! Token-level scoring against an LLM inference service.
//!
//! The wire protocol is two JSON-over-HTTP calls:
//!
//! ```text
//! POST /v1/token_score   {"request_id", "model", "prompt", "target"} -> {"request_id", "logprob"}
//! POST /v1/sequence_nll  {"request_id", "model", "text"}             -> {"request_id", "nll", "token_count"}
//! ```
//!
//! The target token is sent as a literal string; tokenization is left to
//! the service.

mod http;
mod mock;

use std::time::Duration;

use async_trait::async_trait;

pub use http::HttpClient;
pub use mock::MockClient;

/// Environment variable holding the bearer token for the endpoint.
pub const API_TOKEN_ENV: &str = "CURATA_API_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenScoreRequest {
    pub prompt: String,
    pub target_token: String,
}

impl TokenScoreRequest {
    pub fn new(prompt: impl Into<String>, target_token: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            target_token: target_token.into(),
        }
    }

    fn check(&self, request_id: &str) -> Result<(), ClientError> {
        if self.prompt.is_empty() || self.target_token.is_empty() {
            return Err(ClientError::InvalidRequest {
                request_id: request_id.to_owned(),
                message: "prompt and target token must be non-empty".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceNllRequest {
    pub text: String,
}

impl SequenceNllRequest {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    fn check(&self, request_id: &str) -> Result<(), ClientError> {
        if self.text.trim().is_empty() {
            return Err(ClientError::InvalidRequest {
                request_id: request_id.to_owned(),
                message: "text is empty".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceNllResponse {
    /// Total negative log-likelihood in nats.
    pub nll: f64,
    pub token_count: u64,
}

impl SequenceNllResponse {
    fn check(self, request_id: &str) -> Result<Self, ClientError> {
        if !self.nll.is_finite() || self.nll < 0.0 || self.token_count == 0 {
            return Err(ClientError::ProtocolViolation {
                request_id: request_id.to_owned(),
                message: format!("nll {} over {} tokens", self.nll, self.token_count),
            });
        }
        Ok(self)
    }
}

fn check_logprob(request_id: &str, logprob: f64) -> Result<f64, ClientError> {
    if logprob.is_nan() || logprob > 0.0 {
        return Err(ClientError::ProtocolViolation {
            request_id: request_id.to_owned(),
            message: format!("log-probability {logprob} is not <= 0"),
        });
    }
    Ok(logprob)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    pub model: String,
    pub max_in_flight: usize,
    pub timeout: Duration,
    /// Retries after the first attempt.
    pub retries: u32,
    pub backoff_initial: Duration,
    pub backoff_max: Duration,
    pub backoff_multiplier: f64,
    pub api_token: Option<String>,
}

impl ClientConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            max_in_flight: 16,
            timeout: Duration::from_secs(30),
            retries: 4,
            backoff_initial: Duration::from_millis(100),
            backoff_max: Duration::from_secs(10),
            backoff_multiplier: 2.0,
            api_token: None,
        }
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        let bad = |message: &str| {
            Err(ClientError::InvalidRequest {
                request_id: String::new(),
                message: message.into(),
            })
        };
        if self.max_in_flight == 0 {
            return bad("max in-flight must be at least 1");
        }
        if self.timeout.is_zero() {
            return bad("timeout must be positive");
        }
        if !(self.backoff_multiplier >= 1.0 && self.backoff_multiplier.is_finite()) {
            return bad("backoff multiplier must be >= 1");
        }
        if self.model.is_empty() {
            return bad("model id is empty");
        }
        Ok(())
    }

    /// Delay before retry number `attempt` (1-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = self.backoff_multiplier.powi(attempt.saturating_sub(1) as i32);
        self.backoff_initial.mul_f64(factor).min(self.backoff_max)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClientError {
    #[error("request {request_id}: transport error: {message}")]
    Transport { request_id: String, message: String },
    #[error("request {request_id}: service returned status {status}: {body}")]
    Status {
        request_id: String,
        status: u16,
        body: String,
    },
    #[error("request {request_id}: malformed response: {message}")]
    Malformed { request_id: String, message: String },
    #[error("request {request_id}: protocol violation: {message}")]
    ProtocolViolation { request_id: String, message: String },
    #[error("request {request_id}: invalid request: {message}")]
    InvalidRequest { request_id: String, message: String },
    #[error("request {request_id}: timed out")]
    Timeout { request_id: String },
}

impl ClientError {
    pub fn request_id(&self) -> &str {
        match self {
            ClientError::Transport { request_id, .. }
            | ClientError::Status { request_id, .. }
            | ClientError::Malformed { request_id, .. }
            | ClientError::ProtocolViolation { request_id, .. }
            | ClientError::InvalidRequest { request_id, .. }
            | ClientError::Timeout { request_id } => request_id,
        }
    }

    /// Transport failures, timeouts, 429 and 5xx are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            ClientError::Transport { .. } | ClientError::Timeout { .. } => true,
            ClientError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// A scoring backend. Implementations are shared across tasks and may
/// complete requests in any order.
#[async_trait]
pub trait ScoringClient: Send + Sync {
    fn model_id(&self) -> &str;

    /// Concurrency the caller should use; the client enforces it as a cap.
    fn max_in_flight(&self) -> usize;

    /// `log P(target_token | prompt)`, always `<= 0`.
    async fn score_token(&self, request_id: &str, request: &TokenScoreRequest) -> Result<f64, ClientError>;

    async fn sequence_nll(&self, request_id: &str, request: &SequenceNllRequest) -> Result<SequenceNllResponse, ClientError>;
}
