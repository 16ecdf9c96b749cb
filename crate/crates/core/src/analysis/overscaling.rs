use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// One downstream metric measured on three models: the model trained on
/// sampled data, the same model on full data, and the next-larger model on
/// full data.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTriple {
    pub name: String,
    pub sampled: f64,
    pub full: f64,
    pub reference: f64,
    pub higher_is_better: bool,
}

impl MetricTriple {
    pub fn new(name: impl Into<String>, sampled: f64, full: f64, reference: f64, higher_is_better: bool) -> Self {
        Self {
            name: name.into(),
            sampled,
            full,
            reference,
            higher_is_better,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverScaling {
    /// Mean percentage of the gap to the larger model closed by sampling.
    pub percent: f64,
    pub used: usize,
    /// Metrics whose reference equals the full-data value (gap of zero).
    pub skipped: Vec<String>,
}

/// Unweighted mean over metrics of `100 · (sampled − full) / (reference − full)`,
/// after flipping lower-is-better metrics so that improvement is positive.
pub fn over_scaling(triples: &[MetricTriple]) -> Result<OverScaling> {
    let mut total = 0.0;
    let mut used = 0usize;
    let mut skipped = Vec::new();
    for t in triples {
        for v in [t.sampled, t.full, t.reference] {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    id: t.name.clone(),
                    value: v,
                });
            }
        }
        let sign = if t.higher_is_better { 1.0 } else { -1.0 };
        let (sampled, full, reference) = (sign * t.sampled, sign * t.full, sign * t.reference);
        if reference == full {
            skipped.push(t.name.clone());
            continue;
        }
        total += 100.0 * (sampled - full) / (reference - full);
        used += 1;
    }
    if used == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(OverScaling {
        percent: total / used as f64,
        used,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn triples(rows: &[(f64, f64, f64, bool)]) -> Vec<MetricTriple> {
        rows.iter()
            .enumerate()
            .map(|(i, &(s, f, r, h))| MetricTriple::new(alloc::format!("m{i}"), s, f, r, h))
            .collect()
    }

    #[test]
    fn anchors() {
        let same_as_full = triples(&[(1.0, 1.0, 3.0, true), (20.0, 20.0, 15.0, false)]);
        assert_eq!(over_scaling(&same_as_full).unwrap().percent, 0.0);
        let same_as_ref = triples(&[(3.0, 1.0, 3.0, true), (15.0, 20.0, 15.0, false)]);
        assert_eq!(over_scaling(&same_as_ref).unwrap().percent, 100.0);
        let mixed = triples(&[(2.0, 1.0, 3.0, true), (5.0, 4.0, 6.0, true)]);
        assert_eq!(over_scaling(&mixed).unwrap().percent, 50.0);
    }

    #[test]
    fn lower_is_better_metrics_count_improvement_as_positive() {
        // perplexity 10 -> 9 with the larger model at 8: half the gap
        let r = over_scaling(&triples(&[(9.0, 10.0, 8.0, false)])).unwrap();
        assert_eq!(r.percent, 50.0);
    }

    #[test]
    fn zero_gap_metrics_are_skipped() {
        let r = over_scaling(&triples(&[(2.0, 1.0, 3.0, true), (5.0, 4.0, 4.0, true)])).unwrap();
        assert_eq!(r.used, 1);
        assert_eq!(r.skipped, vec!["m1"]);
        assert_eq!(over_scaling(&triples(&[(5.0, 4.0, 4.0, true)])), Err(Error::EmptyInput));
        assert!(over_scaling(&triples(&[(f64::NAN, 4.0, 5.0, true)])).is_err());
    }

    proptest::proptest! {
        #[test]
        fn affine_rescaling_of_one_metric_is_harmless(
            s in -100.0f64..100.0, f in -100.0f64..100.0, r in -100.0f64..100.0,
            a in 0.1f64..10.0, b in -50.0f64..50.0,
        ) {
            proptest::prop_assume!((r - f).abs() > 1e-3);
            let base = over_scaling(&triples(&[(s, f, r, true), (2.0, 1.0, 3.0, true)])).unwrap().percent;
            let scaled = over_scaling(&triples(&[(a * s + b, a * f + b, a * r + b, true), (2.0, 1.0, 3.0, true)])).unwrap().percent;
            proptest::prop_assert!((base - scaled).abs() <= 1e-6 * base.abs().max(1.0));
        }
    }
}
