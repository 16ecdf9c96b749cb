//! Score-driven selection policies.
//!
//! Ranking policies (top-K / bottom-K) sort by score and break ties by
//! ascending id. Stochastic policies use the key order-statistic method for
//! weighted sampling without replacement: item `i` with weight `w_i` draws
//! `u_i ~ U(0, 1)` and gets key `u_i^(1/w_i)`; the `k` largest keys win. The
//! keys are compared in log space, `ln(u_i) / w_i`, and `u_i` is derived from
//! `(seed, id)` so the result does not depend on input order.

use alloc::collections::{BTreeSet, BinaryHeap};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use crate::record::ScoreRecord;
use crate::rng::keyed_unit;
use crate::{Error, Result};

/// Which way inverse-propensity weights point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Weight `1 / score`: favours sparse regions.
    Inverse,
    /// Weight `score`.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    TopK,
    BottomK,
    InversePropensity,
    Propensity,
    UniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionPolicy {
    pub kind: PolicyKind,
    pub k: usize,
    /// Only read by the stochastic kinds.
    pub seed: u64,
}

impl SelectionPolicy {
    pub fn new(kind: PolicyKind, k: usize, seed: u64) -> Self {
        Self { kind, k, seed }
    }

    /// Coverage preset: density scores sampled by inverse propensity.
    pub fn density(k: usize, seed: u64) -> Self {
        Self::new(PolicyKind::InversePropensity, k, seed)
    }

    /// Quality preset: keep the `k` highest Ask-LLM scores.
    pub fn askllm(k: usize) -> Self {
        Self::new(PolicyKind::TopK, k, 0)
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(
            self.kind,
            PolicyKind::InversePropensity | PolicyKind::Propensity | PolicyKind::UniformRandom
        )
    }

    pub fn apply(&self, scores: &[ScoreRecord]) -> Result<SelectionResult> {
        let mut result = match self.kind {
            PolicyKind::TopK => select_top_k(scores, self.k)?,
            PolicyKind::BottomK => select_bottom_k(scores, self.k)?,
            PolicyKind::InversePropensity => select_ips(scores, self.k, Direction::Inverse, self.seed)?,
            PolicyKind::Propensity => select_ips(scores, self.k, Direction::Direct, self.seed)?,
            PolicyKind::UniformRandom => {
                let ids: Vec<&str> = scores.iter().map(|s| s.id.as_str()).collect();
                select_uniform(&ids, self.k, self.seed)?
            }
        };
        result.policy = *self;
        Ok(result)
    }
}

/// Minimum, maximum and total of the sampling weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSummary {
    pub min: f64,
    pub max: f64,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Selected ids, best key (or score) first.
    pub ids: Vec<String>,
    pub policy: SelectionPolicy,
    pub weights: Option<WeightSummary>,
}

/// Candidate ordering: larger key first, then smaller id.
struct Candidate<'a> {
    key: f64,
    id: &'a str,
}

impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.id.cmp(self.id))
    }
}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}

/// Keeps the `k` best candidates in a bounded min-heap; `O(N log k)` time and
/// `O(k)` memory.
fn best_k<'a>(candidates: impl Iterator<Item = Candidate<'a>>, k: usize) -> Vec<String> {
    let mut heap: BinaryHeap<Reverse<Candidate<'a>>> = BinaryHeap::with_capacity(k + 1);
    for c in candidates {
        if heap.len() < k {
            heap.push(Reverse(c));
        } else if let Some(worst) = heap.peek() {
            if c > worst.0 {
                heap.pop();
                heap.push(Reverse(c));
            }
        }
    }
    // ascending Reverse = descending candidate
    heap.into_sorted_vec()
        .into_iter()
        .map(|Reverse(c)| String::from(c.id))
        .collect()
}

fn check_sample(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::ZeroSample);
    }
    if k > n {
        return Err(Error::SampleTooLarge { k, n });
    }
    Ok(())
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.into()));
        }
    }
    Ok(())
}

fn check_scores(scores: &[ScoreRecord], k: usize) -> Result<()> {
    check_sample(scores.len(), k)?;
    for s in scores {
        if s.raw_score.is_nan() {
            return Err(Error::NonFinite {
                id: s.id.clone(),
                value: s.raw_score,
            });
        }
    }
    check_unique(scores.iter().map(|s| s.id.as_str()))
}

fn ranked(scores: &[ScoreRecord], k: usize, kind: PolicyKind, sign: f64) -> Result<SelectionResult> {
    check_scores(scores, k)?;
    let ids = best_k(
        scores.iter().map(|s| Candidate {
            key: sign * s.raw_score,
            id: &s.id,
        }),
        k,
    );
    Ok(SelectionResult {
        ids,
        policy: SelectionPolicy::new(kind, k, 0),
        weights: None,
    })
}

/// The `k` highest scores, ties broken by ascending id.
pub fn select_top_k(scores: &[ScoreRecord], k: usize) -> Result<SelectionResult> {
    ranked(scores, k, PolicyKind::TopK, 1.0)
}

/// The `k` lowest scores, ties broken by ascending id.
pub fn select_bottom_k(scores: &[ScoreRecord], k: usize) -> Result<SelectionResult> {
    ranked(scores, k, PolicyKind::BottomK, -1.0)
}

/// Weighted sampling without replacement, with weights `1/score` (inverse)
/// or `score` (direct). Every score must be positive and finite.
pub fn select_ips(scores: &[ScoreRecord], k: usize, direction: Direction, seed: u64) -> Result<SelectionResult> {
    check_scores(scores, k)?;
    let mut summary = WeightSummary {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        sum: 0.0,
    };
    let mut weights = Vec::with_capacity(scores.len());
    for s in scores {
        if !(s.raw_score.is_finite() && s.raw_score > 0.0) {
            return Err(Error::NonPositiveScore {
                id: s.id.clone(),
                value: s.raw_score,
            });
        }
        let w = match direction {
            Direction::Inverse => 1.0 / s.raw_score,
            Direction::Direct => s.raw_score,
        };
        summary.min = summary.min.min(w);
        summary.max = summary.max.max(w);
        summary.sum += w;
        weights.push(w);
    }
    let ids = best_k(
        scores.iter().zip(&weights).map(|(s, &w)| Candidate {
            key: libm::log(keyed_unit(seed, &s.id)) / w,
            id: &s.id,
        }),
        k,
    );
    let kind = match direction {
        Direction::Inverse => PolicyKind::InversePropensity,
        Direction::Direct => PolicyKind::Propensity,
    };
    Ok(SelectionResult {
        ids,
        policy: SelectionPolicy::new(kind, k, seed),
        weights: Some(summary),
    })
}

/// Seeded uniform `k`-subset: the key method with unit weights.
pub fn select_uniform<S: AsRef<str>>(ids: &[S], k: usize, seed: u64) -> Result<SelectionResult> {
    check_sample(ids.len(), k)?;
    check_unique(ids.iter().map(|s| s.as_ref()))?;
    let selected = best_k(
        ids.iter().map(|id| Candidate {
            key: libm::log(keyed_unit(seed, id.as_ref())),
            id: id.as_ref(),
        }),
        k,
    );
    Ok(SelectionResult {
        ids: selected,
        policy: SelectionPolicy::new(PolicyKind::UniformRandom, k, seed),
        weights: Some(WeightSummary {
            min: 1.0,
            max: 1.0,
            sum: ids.len() as f64,
        }),
    })
}
