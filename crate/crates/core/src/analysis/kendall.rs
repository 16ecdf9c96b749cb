use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::record::ScoreRecord;
use crate::{Error, Result};

fn cmp(a: f64, b: f64) -> Ordering {
    // inputs are validated finite, so partial_cmp never fails; -0.0 == 0.0
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Number of pairs within runs of equal adjacent values.
fn tied_pairs(sorted: impl Iterator<Item = f64>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<f64> = None;
    for v in sorted {
        if prev == Some(v) {
            run += 1;
        } else {
            total += run * (run.saturating_sub(1)) / 2;
            run = 1;
        }
        prev = Some(v);
    }
    total + run * run.saturating_sub(1) / 2
}

/// Stable merge sort of `v` that returns the number of strictly inverted
/// pairs (`i < j`, `v[i] > v[j]`).
fn sort_counting_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        sort_counting_swaps(left, bl) + sort_counting_swaps(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if cmp(v[j], v[i]) == Ordering::Less {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b between paired samples, in `O(N log N)`.
///
/// `tau_b = (n0 − n1 − n2 + n3 − 2·swaps) / sqrt((n0 − n1)(n0 − n2))` where `n0`
/// counts all pairs, `n1`/`n2` pairs tied in `a`/`b`, `n3` pairs tied in both,
/// and `swaps` the discordant pairs found by merge-sorting `b` in `a` order.
pub fn kendall_tau_b(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFew { needed: 2, got: n });
    }
    if let Some(&bad) = a.iter().chain(b).find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            id: alloc::string::String::new(),
            value: bad,
        });
    }

    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|p, q| cmp(p.0, q.0).then(cmp(p.1, q.1)));

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let n1 = tied_pairs(pairs.iter().map(|p| p.0));
    let mut n3 = 0u64;
    let mut run = 1u64;
    for w in pairs.windows(2) {
        if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
            run += 1;
        } else {
            n3 += run * (run - 1) / 2;
            run = 1;
        }
    }
    n3 += run * (run - 1) / 2;

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = alloc::vec![0.0; n];
    let swaps = sort_counting_swaps(&mut ys, &mut buf);
    let n2 = tied_pairs(ys.iter().copied());

    if n1 == n0 || n2 == n0 {
        return Err(Error::AllTied);
    }
    let numerator = n0 as i128 - n1 as i128 - n2 as i128 + n3 as i128 - 2 * swaps as i128;
    let denominator = libm::sqrt((n0 - n1) as f64 * (n0 - n2) as f64);
    Ok(numerator as f64 / denominator)
}

/// Tau-b between two score sets that must cover exactly the same ids.
pub fn kendall_tau_scores(a: &[ScoreRecord], b: &[ScoreRecord]) -> Result<f64> {
    let mut by_id = BTreeMap::new();
    for s in b {
        if by_id.insert(s.id.as_str(), s.raw_score).is_some() {
            return Err(Error::DuplicateId(s.id.clone()));
        }
    }
    if by_id.len() != a.len() {
        return Err(Error::IdMismatch);
    }
    let mut xs = Vec::with_capacity(a.len());
    let mut ys = Vec::with_capacity(a.len());
    for s in a {
        let other = by_id.remove(s.id.as_str()).ok_or(Error::IdMismatch)?;
        xs.push(s.raw_score);
        ys.push(other);
    }
    kendall_tau_b(&xs, &ys)
}
