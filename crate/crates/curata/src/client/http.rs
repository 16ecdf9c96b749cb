use std::sync::Arc;

use async_trait::async_trait;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use super::{
    check_logprob, ClientConfig, ClientError, ScoringClient, SequenceNllRequest, SequenceNllResponse,
    TokenScoreRequest,
};

#[derive(Serialize)]
struct TokenScoreBody<'a> {
    request_id: &'a str,
    model: &'a str,
    prompt: &'a str,
    target: &'a str,
}

#[derive(Deserialize)]
struct TokenScoreReply {
    request_id: String,
    logprob: f64,
}

#[derive(Serialize)]
struct SequenceNllBody<'a> {
    request_id: &'a str,
    model: &'a str,
    text: &'a str,
}

#[derive(Deserialize)]
struct SequenceNllReply {
    request_id: String,
    nll: f64,
    token_count: u64,
}

/// HTTP client with an in-flight cap and exponential-backoff retries.
#[derive(Debug, Clone)]
pub struct HttpClient {
    config: ClientConfig,
    http: reqwest::Client,
    permits: Arc<Semaphore>,
}

impl HttpClient {
    pub fn new(config: ClientConfig) -> Result<Self, ClientError> {
        config.validate()?;
        let http = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ClientError::Transport {
                request_id: String::new(),
                message: e.to_string(),
            })?;
        Ok(Self {
            permits: Arc::new(Semaphore::new(config.max_in_flight)),
            config,
            http,
        })
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    async fn attempt<B: Serialize + Sync, R: DeserializeOwned>(&self, request_id: &str, path: &str, body: &B) -> Result<R, ClientError> {
        let _permit = self.permits.acquire().await.expect("semaphore never closed");
        let mut req = self.http.post(self.url(path)).json(body);
        if let Some(token) = &self.config.api_token {
            req = req.bearer_auth(token);
        }
        let transport = |e: reqwest::Error| {
            if e.is_timeout() {
                ClientError::Timeout {
                    request_id: request_id.to_owned(),
                }
            } else {
                ClientError::Transport {
                    request_id: request_id.to_owned(),
                    message: e.to_string(),
                }
            }
        };
        let resp = req.send().await.map_err(transport)?;
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(transport)?;
        if !status.is_success() {
            return Err(ClientError::Status {
                request_id: request_id.to_owned(),
                status: status.as_u16(),
                body: String::from_utf8_lossy(&bytes).chars().take(200).collect(),
            });
        }
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Malformed {
            request_id: request_id.to_owned(),
            message: e.to_string(),
        })
    }

    async fn call<B: Serialize + Sync, R: DeserializeOwned>(&self, request_id: &str, path: &str, body: &B) -> Result<R, ClientError> {
        let mut attempt = 0;
        loop {
            match self.attempt(request_id, path, body).await {
                Err(e) if e.is_retryable() && attempt < self.config.retries => {
                    attempt += 1;
                    log::debug!("{e}; retry {attempt}/{}", self.config.retries);
                    tokio::time::sleep(self.config.backoff(attempt)).await;
                }
                other => return other,
            }
        }
    }
}

fn check_echo(sent: &str, got: &str) -> Result<(), ClientError> {
    if sent != got {
        return Err(ClientError::ProtocolViolation {
            request_id: sent.to_owned(),
            message: format!("response carries request id {got:?}"),
        });
    }
    Ok(())
}

#[async_trait]
impl ScoringClient for HttpClient {
    fn model_id(&self) -> &str {
        &self.config.model
    }

    fn max_in_flight(&self) -> usize {
        self.config.max_in_flight
    }

    async fn score_token(&self, request_id: &str, request: &TokenScoreRequest) -> Result<f64, ClientError> {
        request.check(request_id)?;
        let body = TokenScoreBody {
            request_id,
            model: &self.config.model,
            prompt: &request.prompt,
            target: &request.target_token,
        };
        let reply: TokenScoreReply = self.call(request_id, "/v1/token_score", &body).await?;
        check_echo(request_id, &reply.request_id)?;
        check_logprob(request_id, reply.logprob)
    }

    async fn sequence_nll(&self, request_id: &str, request: &SequenceNllRequest) -> Result<SequenceNllResponse, ClientError> {
        request.check(request_id)?;
        let body = SequenceNllBody {
            request_id,
            model: &self.config.model,
            text: &request.text,
        };
        let reply: SequenceNllReply = self.call(request_id, "/v1/sequence_nll", &body).await?;
        check_echo(request_id, &reply.request_id)?;
        SequenceNllResponse {
            nll: reply.nll,
            token_count: reply.token_count,
        }
        .check(request_id)
    }
}
