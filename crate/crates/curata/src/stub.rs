//! In-process HTTP server speaking the scoring protocol, for tests and
//! local experiments.
//!
//! Answers come from [`MockModel`] unless fixed values are configured.
//! Faults are deterministic: with `fail_every = n`, the first attempt of
//! every n-th distinct request id (in arrival order) gets a 503, so exactly
//! `floor(keys / n)` requests fail once and succeed on retry.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use curata_core::scoring::MockModel;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

#[derive(Debug, Clone, Default)]
pub struct StubConfig {
    /// Fixed log-probability for every token-score request.
    pub logprob: Option<f64>,
    /// Fixed `(nll, token_count)` for every sequence request.
    pub nll: Option<(f64, u64)>,
    pub fail_every: Option<u64>,
    /// Request ids that always get a 500.
    pub always_fail: HashSet<String>,
    /// Answer token-score requests with a positive log-probability.
    pub positive_logprob: bool,
    /// Echo a wrong request id.
    pub wrong_request_id: bool,
    pub delay: Duration,
}

/// A successfully answered request.
#[derive(Debug, Clone, PartialEq)]
pub enum StubCall {
    TokenScore {
        request_id: String,
        prompt: String,
        target: String,
        logprob: f64,
    },
    SequenceNll {
        request_id: String,
        text: String,
        nll: f64,
        token_count: u64,
    },
}

#[derive(Debug, Default)]
pub struct StubStats {
    pub requests: AtomicU64,
    pub injected_failures: AtomicU64,
    pub in_flight: AtomicU64,
    pub max_in_flight: AtomicU64,
    calls: Mutex<Vec<StubCall>>,
}

impl StubStats {
    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn injected_failures(&self) -> u64 {
        self.injected_failures.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> u64 {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    /// Answered requests in completion order.
    pub fn calls(&self) -> Vec<StubCall> {
        self.calls.lock().expect("stub lock").clone()
    }

    fn log(&self, call: StubCall) {
        self.calls.lock().expect("stub lock").push(call);
    }
}

struct Shared {
    config: StubConfig,
    stats: Arc<StubStats>,
    seen: Mutex<HashSet<String>>,
}

pub struct StubServer {
    addr: SocketAddr,
    stats: Arc<StubStats>,
    shutdown: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Binds an ephemeral local port and starts serving.
    pub async fn start(config: StubConfig) -> std::io::Result<StubServer> {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let stats = Arc::new(StubStats::default());
        let shared = Arc::new(Shared {
            config,
            stats: stats.clone(),
            seen: Mutex::new(HashSet::new()),
        });
        let app = Router::new()
            .route("/v1/token_score", post(token_score))
            .route("/v1/sequence_nll", post(sequence_nll))
            .with_state(shared);
        let (tx, rx) = oneshot::channel();
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
        Ok(StubServer {
            addr,
            stats,
            shutdown: Some(tx),
            task: Some(task),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stats(&self) -> &StubStats {
        &self.stats
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

struct InFlight<'a>(&'a StubStats);

impl<'a> InFlight<'a> {
    fn enter(stats: &'a StubStats) -> Self {
        stats.requests.fetch_add(1, Ordering::SeqCst);
        let now = stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        stats.max_in_flight.fetch_max(now, Ordering::SeqCst);
        InFlight(stats)
    }
}

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

impl Shared {
    /// Decides whether this request gets an injected failure.
    fn fault(&self, key: String, request_id: &str) -> Option<Response> {
        if self.config.always_fail.contains(request_id) {
            return Some((StatusCode::INTERNAL_SERVER_ERROR, "permanent failure").into_response());
        }
        let n = self.config.fail_every?;
        let mut seen = self.seen.lock().expect("stub lock");
        if seen.contains(&key) {
            return None;
        }
        seen.insert(key);
        if n > 0 && (seen.len() as u64).is_multiple_of(n) {
            self.stats.injected_failures.fetch_add(1, Ordering::SeqCst);
            return Some((StatusCode::SERVICE_UNAVAILABLE, "injected failure").into_response());
        }
        None
    }
}

#[derive(Deserialize)]
struct TokenScoreBody {
    request_id: String,
    prompt: String,
    target: String,
}

#[derive(Deserialize)]
struct SequenceNllBody {
    request_id: String,
    text: String,
}

async fn token_score(State(shared): State<Arc<Shared>>, Json(body): Json<TokenScoreBody>) -> Response {
    let _guard = InFlight::enter(&shared.stats);
    tokio::time::sleep(shared.config.delay).await;
    if let Some(r) = shared.fault(format!("t:{}", body.request_id), &body.request_id) {
        return r;
    }
    let mut logprob = shared
        .config
        .logprob
        .unwrap_or_else(|| MockModel.logprob(&body.prompt, &body.target));
    if shared.config.positive_logprob {
        logprob = logprob.abs() + 0.25;
    }
    shared.stats.log(StubCall::TokenScore {
        request_id: body.request_id.clone(),
        prompt: body.prompt,
        target: body.target,
        logprob,
    });
    let id = echo(&shared.config, body.request_id);
    Json(json!({ "request_id": id, "logprob": logprob })).into_response()
}

async fn sequence_nll(State(shared): State<Arc<Shared>>, Json(body): Json<SequenceNllBody>) -> Response {
    let _guard = InFlight::enter(&shared.stats);
    tokio::time::sleep(shared.config.delay).await;
    if let Some(r) = shared.fault(format!("s:{}", body.request_id), &body.request_id) {
        return r;
    }
    let (nll, tokens) = match shared.config.nll {
        Some(fixed) => fixed,
        None => match MockModel.sequence_nll(&body.text) {
            Ok(v) => v,
            Err(e) => return (StatusCode::BAD_REQUEST, e.to_string()).into_response(),
        },
    };
    shared.stats.log(StubCall::SequenceNll {
        request_id: body.request_id.clone(),
        text: body.text,
        nll,
        token_count: tokens,
    });
    let id = echo(&shared.config, body.request_id);
    Json(json!({ "request_id": id, "nll": nll, "token_count": tokens })).into_response()
}

fn echo(config: &StubConfig, id: String) -> String {
    if config.wrong_request_id {
        format!("{id}-other")
    } else {
        id
    }
}
