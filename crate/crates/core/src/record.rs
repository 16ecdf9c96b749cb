//! Records shared by every stage of the pipeline.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::{Error, Result};

/// One corpus item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExampleRecord {
    pub id: String,
    pub text: String,
    pub token_count: Option<u64>,
}

impl ExampleRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            token_count: None,
        }
    }

    /// Records whose text is blank after trimming cannot be scored.
    pub fn is_scorable(&self) -> bool {
        !self.text.trim().is_empty()
    }
}

/// A fixed-dimension embedding keyed by example id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn new(id: impl Into<String>, vector: Vec<f32>) -> Self {
        Self {
            id: id.into(),
            vector,
        }
    }

    pub fn dimension(&self) -> usize {
        self.vector.len()
    }

    /// Scales the vector to unit L2 norm. Zero vectors are left untouched.
    pub fn normalize(&mut self) {
        let norm = libm::sqrt(self.vector.iter().map(|&v| f64::from(v) * f64::from(v)).sum());
        if norm > 0.0 {
            for v in &mut self.vector {
                *v = (f64::from(*v) / norm) as f32;
            }
        }
    }
}

/// A score assigned to one example by one scorer.
///
/// Under every scorer's convention a higher `raw_score` means "better to keep".
/// The density scorer is the exception in spirit: its score measures how
/// crowded the neighbourhood is, and the sampler decides which direction to
/// prefer.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub id: String,
    pub scorer_id: String,
    pub raw_score: f64,
    /// Percentile of `raw_score` within the scored set, in `[0, 100]`.
    pub percentile: Option<f64>,
}

impl ScoreRecord {
    pub fn new(id: impl Into<String>, scorer_id: impl Into<String>, raw_score: f64) -> Self {
        Self {
            id: id.into(),
            scorer_id: scorer_id.into(),
            raw_score,
            percentile: None,
        }
    }
}

/// Checks that every score is finite and that all records share one scorer id.
pub fn validate_scores(scores: &[ScoreRecord]) -> Result<()> {
    let Some(first) = scores.first() else {
        return Ok(());
    };
    for s in scores {
        if !s.raw_score.is_finite() {
            return Err(Error::NonFinite {
                id: s.id.clone(),
                value: s.raw_score,
            });
        }
        if s.scorer_id != first.scorer_id {
            return Err(Error::MixedScorer {
                first: first.scorer_id.clone(),
                other: s.scorer_id.clone(),
            });
        }
    }
    Ok(())
}

/// Average ranks (1-based) of `values` in ascending order, ties sharing the
/// mean of the ranks they span. Values must not be NaN.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));

    let mut ranks = alloc::vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their mean
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Fills in the percentile of every record: `100 * average_rank / N`.
///
/// Output order matches input order. The largest score always maps to 100
/// unless it is tied.
pub fn compute_percentiles(scores: &[ScoreRecord]) -> Result<Vec<ScoreRecord>> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    validate_scores(scores)?;
    let values: Vec<f64> = scores.iter().map(|s| s.raw_score).collect();
    let ranks = average_ranks(&values);
    let n = scores.len() as f64;
    Ok(scores
        .iter()
        .zip(ranks)
        .map(|(s, rank)| ScoreRecord {
            percentile: Some(100.0 * rank / n),
            ..s.clone()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn recs(values: &[f64]) -> Vec<ScoreRecord> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| ScoreRecord::new(alloc::format!("e{i}"), "t", v))
            .collect()
    }

    fn pct(values: &[f64]) -> Vec<f64> {
        compute_percentiles(&recs(values))
            .unwrap()
            .into_iter()
            .map(|r| r.percentile.unwrap())
            .collect()
    }

    #[test]
    fn percentiles_of_distinct_scores() {
        let p = pct(&[1.0, 2.0, 3.0]);
        assert!((p[0] - 100.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(p[2], 100.0);
    }

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(pct(&[5.0, 5.0]), vec![75.0, 75.0]);
        assert_eq!(pct(&[3.0, 1.0, 3.0, 2.0]), vec![87.5, 25.0, 87.5, 50.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(compute_percentiles(&[]), Err(Error::EmptyInput));
        assert!(matches!(
            compute_percentiles(&recs(&[1.0, f64::NAN])),
            Err(Error::NonFinite { .. })
        ));
        let mut mixed = recs(&[1.0, 2.0]);
        mixed[1].scorer_id = "other".into();
        assert!(matches!(
            compute_percentiles(&mixed),
            Err(Error::MixedScorer { .. })
        ));
    }

    #[test]
    fn normalize_unit_norm() {
        let mut e = EmbeddingRecord::new("a", vec![3.0, 4.0]);
        e.normalize();
        assert_eq!(e.vector, vec![0.6, 0.8]);
        let mut z = EmbeddingRecord::new("z", vec![0.0, 0.0]);
        z.normalize();
        assert_eq!(z.vector, vec![0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn percentile_order_follows_sort_order(values in prop::collection::vec(-1e6f64..1e6, 1..500)) {
            let p = pct(&values);
            let max = p.iter().cloned().fold(f64::MIN, f64::max);
            let top = values.iter().cloned().fold(f64::MIN, f64::max);
            if values.iter().filter(|&&v| v == top).count() == 1 {
                prop_assert_eq!(max, 100.0);
            }
            for i in 0..values.len() {
                for j in 0..values.len() {
                    if values[i] < values[j] {
                        prop_assert!(p[i] < p[j]);
                    } else if values[i] == values[j] {
                        prop_assert_eq!(p[i], p[j]);
                    }
                }
            }
        }

        #[test]
        fn percentiles_invariant_under_increasing_transform(ints in prop::collection::vec(-200i32..200, 1..200)) {
            let values: Vec<f64> = ints.iter().map(|&i| f64::from(i)).collect();
            let transformed: Vec<f64> = values.iter().map(|v| libm::exp(*v / 10.0) * 3.0 + 1.0).collect();
            prop_assert_eq!(pct(&values), pct(&transformed));
        }
    }
}
