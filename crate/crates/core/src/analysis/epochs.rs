use crate::{Error, Result};

/// Iso-compute accounting: a fixed token budget spread over a sampled subset
/// means the subset is repeated `epochs` times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochPlan {
    pub dataset_tokens: f64,
    pub sampling_ratio: f64,
    pub budget_tokens: f64,
    pub sampled_tokens: f64,
    pub epochs: f64,
}

pub fn epoch_plan(dataset_tokens: f64, sampling_ratio: f64, budget_tokens: f64) -> Result<EpochPlan> {
    if !(dataset_tokens.is_finite() && dataset_tokens > 0.0) {
        return Err(Error::InvalidArgument("dataset tokens must be positive"));
    }
    if !(budget_tokens.is_finite() && budget_tokens > 0.0) {
        return Err(Error::InvalidArgument("budget tokens must be positive"));
    }
    if !(sampling_ratio > 0.0 && sampling_ratio <= 1.0) {
        return Err(Error::InvalidArgument("sampling ratio must be in (0, 1]"));
    }
    let sampled_tokens = sampling_ratio * dataset_tokens;
    Ok(EpochPlan {
        dataset_tokens,
        sampling_ratio,
        budget_tokens,
        sampled_tokens,
        epochs: budget_tokens / sampled_tokens,
    })
}
