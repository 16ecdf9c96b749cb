use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::kendall::kendall_tau_b;
use crate::record::ScoreRecord;
use crate::{Error, Result};

/// Pairwise tau-b over the ids common to every input.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    /// Scorer id of each input (empty when the input had no records).
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Size of the id intersection the matrix was computed on.
    pub common: usize,
    /// Records each input lost to the inner join.
    pub dropped: Vec<usize>,
}

pub fn correlation_matrix(sets: &[&[ScoreRecord]]) -> Result<CorrelationMatrix> {
    if sets.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut maps = Vec::with_capacity(sets.len());
    for set in sets {
        let mut m = BTreeMap::new();
        for s in *set {
            if m.insert(s.id.as_str(), s.raw_score).is_some() {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        maps.push(m);
    }
    let mut common: BTreeSet<&str> = maps[0].keys().copied().collect();
    for m in &maps[1..] {
        common.retain(|id| m.contains_key(id));
    }
    if common.is_empty() {
        return Err(Error::IdMismatch);
    }
    let columns: Vec<Vec<f64>> = maps
        .iter()
        .map(|m| common.iter().map(|id| m[id]).collect())
        .collect();

    let k = sets.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in i + 1..k {
            let t = kendall_tau_b(&columns[i], &columns[j])?;
            values[i][j] = t;
            values[j][i] = t;
        }
    }
    Ok(CorrelationMatrix {
        labels: sets
            .iter()
            .map(|s| s.first().map(|r| r.scorer_id.clone()).unwrap_or_default())
            .collect(),
        values,
        common: common.len(),
        dropped: sets.iter().map(|s| s.len() - common.len()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(scorer: &str, pairs: &[(&str, f64)]) -> Vec<ScoreRecord> {
        pairs.iter().map(|&(id, v)| ScoreRecord::new(id, scorer, v)).collect()
    }

    #[test]
    fn single_input_is_unit() {
        let a = set("a", &[("x", 1.0), ("y", 2.0)]);
        let m = correlation_matrix(&[&a]).unwrap();
        assert_eq!(m.values, vec![vec![1.0]]);
    }

    #[test]
    fn identical_inputs_correlate_perfectly() {
        let a = set("a", &[("x", 1.0), ("y", 2.0), ("z", 0.5)]);
        let c = set("c", &[("x", 3.0), ("y", 1.0), ("z", 2.0)]);
        let m = correlation_matrix(&[&a, &a, &c]).unwrap();
        assert_eq!(m.values[0][1], 1.0);
        assert_eq!(m.values[1][0], 1.0);
        for i in 0..3 {
            assert_eq!(m.values[i][i], 1.0);
            for j in 0..3 {
                assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
        assert_eq!(m.labels, vec!["a", "a", "c"]);
    }

    #[test]
    fn inner_join_reports_sizes() {
        let a = set("a", &[("p", 1.0), ("q", 2.0), ("r", 3.0), ("s", 4.0)]);
        let b = set("b", &[("q", 5.0), ("r", 6.0), ("s", 7.0), ("t", 8.0), ("u", 9.0)]);
        let m = correlation_matrix(&[&a, &b]).unwrap();
        assert_eq!(m.common, 3);
        assert_eq!(m.dropped, vec![1, 2]);
        assert_eq!(m.values[0][1], 1.0);

        let disjoint = set("d", &[("zz", 1.0)]);
        assert_eq!(correlation_matrix(&[&a, &disjoint]), Err(Error::IdMismatch));
        assert_eq!(correlation_matrix(&[]), Err(Error::EmptyInput));
    }
}
