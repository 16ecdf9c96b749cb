//! Score conventions shared by the scorers, and the offline mock model.
//!
//! Every scorer emits "higher is better to keep":
//!
//! | scorer      | raw score                         | range      |
//! |-------------|-----------------------------------|------------|
//! | Ask-LLM     | `P(yes | prompt) = exp(logprob)`   | `(0, 1]`   |
//! | perplexity  | `-exp(nll / tokens)`              | `≤ -1`     |
//! | density     | mean sketch count over rows       | `[1, N]` for inserted points |

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::lsh::{HashFamilySpec, HashKind};
use crate::prompt::PromptTemplate;
use crate::record::{EmbeddingRecord, ScoreRecord};
use crate::rng::{hash_to_unit, stable_hash, stable_hash_pair};
use crate::sketch::KdeSketch;
use crate::{Error, Result};

/// The continuation whose probability the Ask-LLM scorer reads.
pub const YES_TOKEN: &str = "yes";

/// Largest magnitude the mock model assigns to a log-probability or a
/// per-token negative log-likelihood.
pub const MOCK_SCALE: f64 = 5.0;

/// Converts the log-probability of "yes" into the Ask-LLM score.
pub fn askllm_score(logprob: f64) -> Result<f64> {
    if !logprob.is_finite() || logprob > 0.0 {
        return Err(Error::InvalidArgument("log-probability must be finite and <= 0"));
    }
    Ok(libm::exp(logprob))
}

/// Negated perplexity, `-exp(nll / tokens)`, from a total negative
/// log-likelihood in nats.
pub fn perplexity_score(total_nll: f64, token_count: u64) -> Result<f64> {
    if token_count == 0 {
        return Err(Error::InvalidArgument("token count must be at least 1"));
    }
    if !total_nll.is_finite() || total_nll < 0.0 {
        return Err(Error::InvalidArgument("negative log-likelihood must be finite and >= 0"));
    }
    Ok(-libm::exp(total_nll / token_count as f64))
}

/// Deterministic stand-in for a language model.
///
/// `logprob(prompt, target)` is minus a stable hash of the pair mapped onto
/// `(0, 5]`; `sequence_nll(text)` counts whitespace-separated tokens and
/// charges each one the same hash-derived cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MockModel;

impl MockModel {
    pub fn logprob(&self, prompt: &str, target: &str) -> f64 {
        -MOCK_SCALE * hash_to_unit(stable_hash_pair(prompt, target))
    }

    /// Returns `(total_nll, token_count)`.
    pub fn sequence_nll(&self, text: &str) -> Result<(f64, u64)> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText(String::new()));
        }
        let tokens = text.split_whitespace().count() as u64;
        let per_token = MOCK_SCALE * hash_to_unit(stable_hash(text.as_bytes()));
        Ok((per_token * tokens as f64, tokens))
    }
}

/// Result of scoring one example.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Scored(f64),
    /// Scoring failed for good; the example must not be given a default score.
    Unscored { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredExample {
    pub id: String,
    pub outcome: Outcome,
    /// The prompt carried a truncated copy of the text.
    pub truncated: bool,
}

/// Per-example outcomes in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBatch {
    pub scorer_id: String,
    pub entries: Vec<ScoredExample>,
}

impl ScoreBatch {
    pub fn records(&self) -> Vec<ScoreRecord> {
        self.entries
            .iter()
            .filter_map(|e| match e.outcome {
                Outcome::Scored(v) => Some(ScoreRecord::new(e.id.clone(), self.scorer_id.clone(), v)),
                Outcome::Unscored { .. } => None,
            })
            .collect()
    }

    pub fn unscored(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().filter_map(|e| match &e.outcome {
            Outcome::Unscored { reason } => Some((e.id.as_str(), reason.as_str())),
            Outcome::Scored(_) => None,
        })
    }

    pub fn scored_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(e.outcome, Outcome::Scored(_)))
            .count()
    }

    pub fn truncated_count(&self) -> usize {
        self.entries.iter().filter(|e| e.truncated).count()
    }
}

pub fn askllm_scorer_id(model: &str, template: &PromptTemplate) -> String {
    format!("askllm/{model}/tpl-{}", template.fingerprint())
}

pub fn perplexity_scorer_id(model: &str) -> String {
    format!("perplexity/{model}")
}

/// `density/<kind>/<8-hex spec fingerprint>`.
pub fn density_scorer_id(spec: &HashFamilySpec) -> String {
    let (kind, param) = match spec.kind {
        HashKind::EuclideanPStable { bandwidth } => ("l2", bandwidth.to_bits()),
        HashKind::CosineSignedProjection { bits } => ("cos", u64::from(bits)),
    };
    let key = format!(
        "{kind}:{param}:{}:{}:{}:{}",
        spec.dimension, spec.rows, spec.range, spec.seed
    );
    format!("density/{kind}/{:08x}", stable_hash(key.as_bytes()) as u32)
}

/// Second pass of density scoring: one record per embedding, in input order.
pub fn density_scores<'a>(
    sketch: &KdeSketch,
    embeddings: impl IntoIterator<Item = &'a EmbeddingRecord>,
) -> Result<Vec<ScoreRecord>> {
    let scorer_id = density_scorer_id(sketch.spec());
    embeddings
        .into_iter()
        .map(|e| Ok(ScoreRecord::new(e.id.clone(), scorer_id.clone(), sketch.score(&e.vector)?)))
        .collect()
}
