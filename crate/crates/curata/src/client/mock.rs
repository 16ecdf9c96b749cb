use async_trait::async_trait;
use curata_core::scoring::MockModel;

use super::{check_logprob, ClientError, ScoringClient, SequenceNllRequest, SequenceNllResponse, TokenScoreRequest};

/// Offline client backed by [`MockModel`]: same request, same answer.
#[derive(Debug, Clone)]
pub struct MockClient {
    model: String,
    max_in_flight: usize,
}

impl MockClient {
    pub fn new() -> Self {
        Self::with_model("mock")
    }

    pub fn with_model(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            max_in_flight: 8,
        }
    }

    pub fn max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }
}

impl Default for MockClient {
    fn default() -> Self {
        Self::new()
    }
}

#[async_trait]
impl ScoringClient for MockClient {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }

    async fn score_token(&self, request_id: &str, request: &TokenScoreRequest) -> Result<f64, ClientError> {
        request.check(request_id)?;
        check_logprob(request_id, MockModel.logprob(&request.prompt, &request.target_token))
    }

    async fn sequence_nll(&self, request_id: &str, request: &SequenceNllRequest) -> Result<SequenceNllResponse, ClientError> {
        request.check(request_id)?;
        let (nll, token_count) = MockModel
            .sequence_nll(&request.text)
            .map_err(|e| ClientError::InvalidRequest {
                request_id: request_id.to_owned(),
                message: e.to_string(),
            })?;
        SequenceNllResponse { nll, token_count }.check(request_id)
    }
}
