use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Equal-width histogram over `[min, max]`; bins are half-open except the
/// last, which is closed on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn score_histogram(scores: &[f64], bins: usize) -> Result<Histogram> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("bin count must be at least 1"));
    }
    if let Some(&bad) = scores.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            id: alloc::string::String::new(),
            value: bad,
        });
    }
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|i| min + width * i as f64).collect();
    edges[bins] = max;

    let mut counts = vec![0u64; bins];
    if width == 0.0 {
        counts[0] = scores.len() as u64;
        return Ok(Histogram { edges, counts });
    }
    for &v in scores {
        let mut idx = (((v - min) / width) as usize).min(bins - 1);
        // settle rounding at interior edges against the reported edges
        while idx > 0 && v < edges[idx] {
            idx -= 1;
        }
        while idx + 1 < bins && v >= edges[idx + 1] {
            idx += 1;
        }
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn small_cases() {
        assert_eq!(score_histogram(&[3.0], 1).unwrap().counts, vec![1]);
        let h = score_histogram(&[0.0, 1.0], 2).unwrap();
        assert_eq!(h.counts, vec![1, 1]);
        assert_eq!(h.edges, vec![0.0, 0.5, 1.0]);
        assert_eq!(score_histogram(&[2.0, 2.0, 2.0], 4).unwrap().counts, vec![3, 0, 0, 0]);
        assert_eq!(score_histogram(&[0.0, 0.5, 1.0], 2).unwrap().counts, vec![1, 2]);
    }

    #[test]
    fn errors() {
        assert!(score_histogram(&[], 3).is_err());
        assert!(score_histogram(&[1.0], 0).is_err());
        assert!(score_histogram(&[1.0, f64::INFINITY], 2).is_err());
    }

    #[test]
    fn uniform_draws_fill_bins_evenly() {
        let mut rng = crate::rng::stream_rng(77, 0);
        let v: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let h = score_histogram(&v, 10).unwrap();
        assert_eq!(h.total(), 10_000);
        for &c in &h.counts {
            assert!((850..=1150).contains(&c), "{:?}", h.counts);
        }
    }

    proptest::proptest! {
        #[test]
        fn counts_sum_to_n(v in proptest::collection::vec(-1e9f64..1e9, 1..300), bins in 1usize..50) {
            let h = score_histogram(&v, bins).unwrap();
            proptest::prop_assert_eq!(h.total(), v.len() as u64);
            proptest::prop_assert_eq!(h.edges.len(), bins + 1);
            for &x in &v {
                let i = h.counts.len();
                proptest::prop_assert!(x >= h.edges[0] && x <= h.edges[i]);
            }
        }
    }
}
