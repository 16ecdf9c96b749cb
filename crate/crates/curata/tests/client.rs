use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use curata::client::{ClientConfig, ClientError, HttpClient, ScoringClient, SequenceNllRequest, TokenScoreRequest};
use curata::core::scoring::{perplexity_score, MockModel};
use curata::stub::{StubConfig, StubServer};
use futures::future::join_all;

fn config(url: &str, in_flight: usize) -> ClientConfig {
    let mut c = ClientConfig::new(url, "stub-model");
    c.max_in_flight = in_flight;
    c.timeout = Duration::from_secs(5);
    c.backoff_initial = Duration::from_millis(5);
    c
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn hundred_requests_respect_the_in_flight_cap() {
    let stub = StubServer::start(StubConfig {
        delay: Duration::from_millis(20),
        ..StubConfig::default()
    })
    .await
    .unwrap();
    let client = Arc::new(HttpClient::new(config(&stub.url(), 8)).unwrap());
    let tasks = (0..100).map(|i| {
        let client = client.clone();
        tokio::spawn(async move {
            let req = TokenScoreRequest::new(format!("prompt number {i}"), "yes");
            (i, client.score_token(&format!("req-{i}"), &req).await)
        })
    });
    let results: HashMap<usize, f64> = join_all(tasks)
        .await
        .into_iter()
        .map(|r| {
            let (i, lp) = r.unwrap();
            (i, lp.unwrap())
        })
        .collect();
    assert_eq!(results.len(), 100);
    for (i, lp) in &results {
        assert_eq!(*lp, MockModel.logprob(&format!("prompt number {i}"), "yes"));
    }
    assert_eq!(stub.stats().requests(), 100);
    let peak = stub.stats().max_in_flight();
    assert!((2..=8).contains(&peak), "peak in flight {peak}");
    stub.shutdown().await;
}

#[tokio::test]
async fn positive_logprob_is_a_protocol_violation() {
    let stub = StubServer::start(StubConfig {
        positive_logprob: true,
        ..StubConfig::default()
    })
    .await
    .unwrap();
    let client = HttpClient::new(config(&stub.url(), 1)).unwrap();
    let err = client.score_token("r1", &TokenScoreRequest::new("p", "yes")).await.unwrap_err();
    assert!(matches!(err, ClientError::ProtocolViolation { .. }), "{err}");
    assert_eq!(err.request_id(), "r1");
}

#[tokio::test]
async fn mismatched_request_id_is_rejected() {
    let stub = StubServer::start(StubConfig {
        wrong_request_id: true,
        ..StubConfig::default()
    })
    .await
    .unwrap();
    let client = HttpClient::new(config(&stub.url(), 1)).unwrap();
    let err = client.sequence_nll("r2", &SequenceNllRequest::new("a b")).await.unwrap_err();
    assert!(matches!(err, ClientError::ProtocolViolation { .. }));
}

#[tokio::test]
async fn fixed_nll_feeds_perplexity() {
    let stub = StubServer::start(StubConfig {
        nll: Some((2.0, 4)),
        ..StubConfig::default()
    })
    .await
    .unwrap();
    let client = HttpClient::new(config(&stub.url(), 2)).unwrap();
    let r = client.sequence_nll("r", &SequenceNllRequest::new("anything at all")).await.unwrap();
    assert_eq!((r.nll, r.token_count), (2.0, 4));
    assert!((perplexity_score(r.nll, r.token_count).unwrap() + 0.5f64.exp()).abs() < 1e-12);
}

#[tokio::test]
async fn transient_failures_are_retried_permanent_ones_surface() {
    let stub = StubServer::start(StubConfig {
        fail_every: Some(1),
        always_fail: ["doomed".to_owned()].into(),
        ..StubConfig::default()
    })
    .await
    .unwrap();
    let client = HttpClient::new(config(&stub.url(), 2)).unwrap();
    let req = TokenScoreRequest::new("p", "yes");
    assert!(client.score_token("fine", &req).await.is_ok());
    assert_eq!(stub.stats().injected_failures(), 1);
    let err = client.score_token("doomed", &req).await.unwrap_err();
    assert!(matches!(err, ClientError::Status { status: 500, .. }));
    // one first attempt plus four retries
    assert_eq!(stub.stats().requests(), 2 + 5);

    let mut no_retry = config(&stub.url(), 2);
    no_retry.retries = 0;
    let client = HttpClient::new(no_retry).unwrap();
    let err = client.score_token("fresh", &req).await.unwrap_err();
    assert!(matches!(err, ClientError::Status { status: 503, .. }));
    assert!(err.to_string().contains("fresh"));
}

#[tokio::test]
async fn slow_service_times_out() {
    let stub = StubServer::start(StubConfig {
        delay: Duration::from_millis(400),
        ..StubConfig::default()
    })
    .await
    .unwrap();
    let mut c = config(&stub.url(), 1);
    c.timeout = Duration::from_millis(50);
    c.retries = 0;
    let client = HttpClient::new(c).unwrap();
    let err = client.score_token("slow", &TokenScoreRequest::new("p", "yes")).await.unwrap_err();
    assert!(matches!(err, ClientError::Timeout { .. }), "{err}");
}

#[tokio::test]
async fn invalid_requests_never_reach_the_wire() {
    let stub = StubServer::start(StubConfig::default()).await.unwrap();
    let client = HttpClient::new(config(&stub.url(), 1)).unwrap();
    assert!(matches!(
        client.score_token("e", &TokenScoreRequest::new("p", "")).await,
        Err(ClientError::InvalidRequest { .. })
    ));
    assert!(client.sequence_nll("e", &SequenceNllRequest::new(" ")).await.is_err());
    assert_eq!(stub.stats().requests(), 0);
}
