//! Kernel density sketch: an `R × B` matrix of counters.
//!
//! Building inserts every point once, incrementing one counter per row. A
//! query's score is the mean over rows of the counter it hashes to, which is an
//! unbiased estimate of `Σ_i k(x_i, q)` for the LSH kernel `k` (up to the small
//! inflation from range reduction). Dividing by `N` estimates the kernel mean.
//!
//! Counts are additive, so sketches built over disjoint shards with the same
//! spec merge into exactly the sketch of the concatenated data.

use alloc::vec::Vec;

use crate::lsh::{HashFamily, HashFamilySpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KdeSketch {
    family: HashFamily,
    /// Row-major `rows × range` counters.
    counts: Vec<u32>,
    inserted: u64,
}

impl KdeSketch {
    /// An all-zero sketch. Fails with [`Error::Allocation`] if the counter
    /// payload cannot be allocated.
    pub fn new(spec: HashFamilySpec) -> Result<Self> {
        spec.validate()?;
        let counts = zeroed_counts(&spec)?;
        let family = HashFamily::new(spec)?;
        Ok(Self {
            family,
            counts,
            inserted: 0,
        })
    }

    /// An all-zero sketch sharing an existing family's projections.
    pub fn from_family(family: HashFamily) -> Result<Self> {
        let counts = zeroed_counts(family.spec())?;
        Ok(Self {
            family,
            counts,
            inserted: 0,
        })
    }

    /// Rebuilds a sketch from stored parts, checking the row-sum invariant.
    pub fn from_parts(spec: HashFamilySpec, inserted: u64, counts: Vec<u32>) -> Result<Self> {
        let family = HashFamily::new(spec)?;
        if counts.len() != spec.rows * spec.range as usize {
            return Err(Error::CorruptSketch("counter payload has the wrong length"));
        }
        for row in counts.chunks_exact(spec.range as usize) {
            if row.iter().map(|&c| u64::from(c)).sum::<u64>() != inserted {
                return Err(Error::CorruptSketch("row sum differs from insert count"));
            }
        }
        Ok(Self {
            family,
            counts,
            inserted,
        })
    }

    pub fn spec(&self) -> &HashFamilySpec {
        self.family.spec()
    }

    pub fn family(&self) -> &HashFamily {
        &self.family
    }

    /// Number of points inserted, `N`.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn row(&self, row: usize) -> &[u32] {
        let b = self.family.range() as usize;
        &self.counts[row * b..(row + 1) * b]
    }

    /// Size of the counter matrix in bytes (4 bytes per counter).
    pub fn payload_bytes(&self) -> usize {
        self.counts.len() * core::mem::size_of::<u32>()
    }

    /// Inserts one point. Either every row is incremented or, on overflow,
    /// nothing changes.
    pub fn add(&mut self, x: &[f32]) -> Result<()> {
        let buckets = self.family.buckets(x)?;
        let b = self.family.range() as usize;
        for (row, &bucket) in buckets.iter().enumerate() {
            if self.counts[row * b + bucket as usize] == u32::MAX {
                return Err(Error::CounterOverflow {
                    row,
                    bucket: bucket as usize,
                });
            }
        }
        for (row, &bucket) in buckets.iter().enumerate() {
            self.counts[row * b + bucket as usize] += 1;
        }
        self.inserted += 1;
        Ok(())
    }

    /// Mean over rows of the counter `y` hashes to: the raw kernel-sum
    /// estimate on the scale of `N`.
    pub fn score(&self, y: &[f32]) -> Result<f64> {
        if self.inserted == 0 {
            return Err(Error::EmptySketch);
        }
        let buckets = self.family.buckets(y)?;
        let b = self.family.range() as usize;
        let total: u64 = buckets
            .iter()
            .enumerate()
            .map(|(row, &bucket)| u64::from(self.counts[row * b + bucket as usize]))
            .sum();
        Ok(total as f64 / self.family.rows() as f64)
    }

    /// [`score`](Self::score) divided by `N`: an estimate of the kernel mean,
    /// never above 1.
    pub fn score_normalized(&self, y: &[f32]) -> Result<f64> {
        Ok(self.score(y)? / self.inserted as f64)
    }

    /// Adds `other`'s counts into `self`. Specs must match exactly, seed
    /// included. On overflow `self` is left unchanged.
    pub fn merge_from(&mut self, other: &KdeSketch) -> Result<()> {
        if self.spec() != other.spec() {
            return Err(Error::SpecMismatch);
        }
        let b = self.family.range() as usize;
        let mut merged = Vec::new();
        merged
            .try_reserve_exact(self.counts.len())
            .map_err(|_| Error::Allocation {
                bytes: self.payload_bytes(),
            })?;
        for (i, (&a, &c)) in self.counts.iter().zip(&other.counts).enumerate() {
            merged.push(a.checked_add(c).ok_or(Error::CounterOverflow {
                row: i / b,
                bucket: i % b,
            })?);
        }
        self.counts = merged;
        self.inserted += other.inserted;
        Ok(())
    }

    pub fn merge(a: &KdeSketch, b: &KdeSketch) -> Result<KdeSketch> {
        let mut out = a.clone();
        out.merge_from(b)?;
        Ok(out)
    }
}

fn zeroed_counts(spec: &HashFamilySpec) -> Result<Vec<u32>> {
    let cells = spec
        .rows
        .checked_mul(spec.range as usize)
        .ok_or(Error::Allocation { bytes: usize::MAX })?;
    let bytes = cells.checked_mul(4).ok_or(Error::Allocation { bytes: usize::MAX })?;
    let mut counts = Vec::new();
    counts
        .try_reserve_exact(cells)
        .map_err(|_| Error::Allocation { bytes })?;
    counts.resize(cells, 0);
    Ok(counts)
}

/// Exact kernel mean `(1/N) Σ_i k(x_i, y)` for the spec's kernel: the quantity
/// the normalized sketch score estimates.
pub fn brute_force_kernel_sum<V: AsRef<[f32]>>(data: &[V], y: &[f32], spec: &HashFamilySpec) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for x in data {
        total += spec.collision_probability(x.as_ref(), y)?;
    }
    Ok(total / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsh::median_pairwise_distance;
    use crate::rng::stream_rng;
    use alloc::vec;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(seed: u64, n: usize, d: usize) -> Vec<Vec<f32>> {
        let mut rng = stream_rng(seed, 0);
        (0..n)
            .map(|_| (0..d).map(|_| rng.sample::<f32, _>(StandardNormal)).collect())
            .collect()
    }

    fn build(spec: HashFamilySpec, data: &[Vec<f32>]) -> KdeSketch {
        let mut s = KdeSketch::new(spec).unwrap();
        for x in data {
            s.add(x).unwrap();
        }
        s
    }

    fn assert_row_sums(s: &KdeSketch) {
        for r in 0..s.spec().rows {
            assert_eq!(s.row(r).iter().map(|&c| u64::from(c)).sum::<u64>(), s.inserted());
        }
    }

    #[test]
    fn new_sketch_is_zero() {
        let s = KdeSketch::new(HashFamilySpec::euclidean(2, 1.0, 2, 3, 0)).unwrap();
        assert_eq!(s.counts(), &[0; 6]);
        assert_eq!(s.inserted(), 0);
        assert_eq!(s.payload_bytes(), 24);
        assert!(KdeSketch::new(HashFamilySpec::euclidean(2, 1.0, 2, 0, 0)).is_err());
    }

    #[test]
    fn reports_unallocatable_payload() {
        let err = KdeSketch::new(HashFamilySpec::euclidean(1, 1.0, usize::MAX / 8, u32::MAX, 0)).unwrap_err();
        assert!(matches!(err, Error::Allocation { .. }));
    }

    #[test]
    fn single_point() {
        let spec = HashFamilySpec::euclidean(3, 1.0, 10, 50, 1);
        let x = [0.3, -0.2, 1.0];
        let mut s = build(spec, &[x.to_vec()]);
        assert_row_sums(&s);
        assert_eq!(s.score(&x).unwrap(), 1.0);
        s.add(&x).unwrap();
        let buckets = s.family().buckets(&x).unwrap();
        for (r, &b) in buckets.iter().enumerate() {
            assert_eq!(s.row(r)[b as usize], 2);
        }
        assert_eq!(s.score(&x).unwrap(), 2.0);
        assert_eq!(s.score_normalized(&x).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        let spec = HashFamilySpec::euclidean(3, 1.0, 4, 8, 1);
        let mut s = KdeSketch::new(spec).unwrap();
        assert_eq!(s.score(&[0.0; 3]), Err(Error::EmptySketch));
        assert!(matches!(s.add(&[0.0; 2]), Err(Error::DimensionMismatch { .. })));
        s.add(&[0.0; 3]).unwrap();
        assert!(matches!(s.score(&[0.0; 4]), Err(Error::DimensionMismatch { .. })));
        let other = KdeSketch::new(HashFamilySpec { seed: 2, ..spec }).unwrap();
        assert_eq!(s.merge_from(&other), Err(Error::SpecMismatch));
    }

    #[test]
    fn overflow_fails_without_partial_update() {
        let spec = HashFamilySpec::euclidean(1, 1.0, 3, 4, 1);
        let x = [0.5f32];
        let mut s = build(spec, &[x.to_vec()]);
        let bucket = s.family().hash_row(2, &x).unwrap() as usize;
        s.counts[2 * 4 + bucket] = u32::MAX;
        let before = s.clone();
        assert!(matches!(s.add(&x), Err(Error::CounterOverflow { row: 2, .. })));
        assert_eq!(s, before);
        let one = build(spec, &[x.to_vec()]);
        assert!(matches!(s.merge_from(&one), Err(Error::CounterOverflow { .. })));
        assert_eq!(s, before);
    }

    #[test]
    fn merge_is_commutative_and_matches_single_pass() {
        let spec = HashFamilySpec::euclidean(5, 2.0, 30, 200, 9);
        let data = gaussian(4, 500, 5);
        let whole = build(spec, &data);
        let a = build(spec, &data[..250]);
        let b = build(spec, &data[250..]);
        let ab = KdeSketch::merge(&a, &b).unwrap();
        let ba = KdeSketch::merge(&b, &a).unwrap();
        assert_eq!(ab, whole);
        assert_eq!(ba, whole);
        assert_row_sums(&ab);
        let empty = KdeSketch::new(spec).unwrap();
        assert_eq!(KdeSketch::merge(&whole, &empty).unwrap(), whole);
    }

    #[test]
    fn from_parts_checks_invariants() {
        let spec = HashFamilySpec::euclidean(2, 1.0, 2, 3, 0);
        assert!(KdeSketch::from_parts(spec, 1, vec![1, 0, 0, 0, 1, 0]).is_ok());
        assert!(KdeSketch::from_parts(spec, 1, vec![1, 0, 0, 0, 0, 0]).is_err());
        assert!(KdeSketch::from_parts(spec, 1, vec![1, 0, 0]).is_err());
    }

    #[test]
    fn brute_force_limits() {
        let spec = HashFamilySpec::euclidean(2, 1.0, 1, 2, 0);
        let y = [0.5f32, 0.5];
        assert_eq!(brute_force_kernel_sum(&[y.to_vec()], &y, &spec).unwrap(), 1.0);
        let far = [vec![1e30f32, 0.0], vec![-1e30, 0.0]];
        assert!(brute_force_kernel_sum(&far, &y, &spec).unwrap() < 1e-20);
        assert_eq!(brute_force_kernel_sum::<Vec<f32>>(&[], &y, &spec), Err(Error::EmptyInput));
    }

    fn mean_errors(seed: u64, rows: usize) -> (f64, f64) {
        let data = gaussian(100 + seed, 2000, 32);
        let queries = gaussian(200 + seed, 50, 32);
        let lambda = median_pairwise_distance(&data, 1000, seed).unwrap();
        let spec = HashFamilySpec::euclidean(32, lambda, rows, 20_000, seed);
        let sketch = build(spec, &data);
        let (mut abs, mut rel) = (0.0, 0.0);
        for q in &queries {
            let est = sketch.score_normalized(q).unwrap();
            assert!(est <= 1.0);
            let truth = brute_force_kernel_sum(&data, q, &spec).unwrap();
            abs += (est - truth).abs();
            rel += (est - truth).abs() / truth;
        }
        (abs / 50.0, rel / 50.0)
    }

    #[test]
    fn normalized_score_tracks_kernel_mean() {
        let (_, rel) = mean_errors(0, 500);
        assert!(rel <= 0.1, "mean relative error {rel}");
    }

    #[test]
    fn error_shrinks_as_rows_grow() {
        let avg = |rows| (0..5).map(|s| mean_errors(s, rows).0).sum::<f64>() / 5.0;
        let (e50, e200, e800) = (avg(50), avg(200), avg(800));
        assert!(e50 > e200 && e200 > e800, "{e50} {e200} {e800}");
    }

    proptest::proptest! {
        #[test]
        fn rows_sum_to_n_and_order_is_irrelevant(seed in 0u64..1000, n in 1usize..200) {
            let spec = HashFamilySpec::euclidean(3, 0.7, 8, 16, seed);
            let data = gaussian(seed, n, 3);
            let forward = build(spec, &data);
            let mut rev = data.clone();
            rev.reverse();
            let backward = build(spec, &rev);
            proptest::prop_assert_eq!(&forward, &backward);
            assert_row_sums(&forward);
            for x in &data {
                let s = forward.score(x).unwrap();
                proptest::prop_assert!(s >= 1.0 && s <= n as f64);
            }
        }
    }
}
