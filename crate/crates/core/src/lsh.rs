//! Seeded locality-sensitive hash families.
//!
//! Two families are provided:
//!
//! * **p-stable (Euclidean).** Row `r` draws a Gaussian projection `w_r` and an
//!   offset `b_r ~ U[0, λ)` and maps `x` to `floor((w_r·x + b_r) / λ)`. The
//!   probability that two points collide in one row depends only on
//!   `‖x − y‖ / λ` and is a positive-definite kernel.
//! * **signed projection (cosine).** Row `r` draws `bits` Gaussian projections
//!   and maps `x` to the bit pattern of their signs. Collision probability is
//!   `(1 − θ/π)^bits` where `θ` is the angle between the points.
//!
//! Raw indices are reduced modulo the range `B` to address a finite table.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::stream_rng;
use crate::{Error, Result};

/// Which kernel a family realizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HashKind {
    /// Gaussian p-stable hashing with bucket width `bandwidth`.
    EuclideanPStable { bandwidth: f64 },
    /// `bits` signed random projections concatenated into one index.
    CosineSignedProjection { bits: u32 },
}

impl HashKind {
    fn projections_per_row(&self) -> usize {
        match self {
            HashKind::EuclideanPStable { .. } => 1,
            HashKind::CosineSignedProjection { bits } => *bits as usize,
        }
    }
}

/// Everything needed to regenerate a hash family bit for bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HashFamilySpec {
    pub kind: HashKind,
    pub dimension: usize,
    /// Number of independent hash functions `R`.
    pub rows: usize,
    /// Finite range `B` every row is reduced into.
    pub range: u32,
    pub seed: u64,
}

impl HashFamilySpec {
    pub fn euclidean(dimension: usize, bandwidth: f64, rows: usize, range: u32, seed: u64) -> Self {
        Self {
            kind: HashKind::EuclideanPStable { bandwidth },
            dimension,
            rows,
            range,
            seed,
        }
    }

    pub fn cosine(dimension: usize, bits: u32, rows: usize, range: u32, seed: u64) -> Self {
        Self {
            kind: HashKind::CosineSignedProjection { bits },
            dimension,
            rows,
            range,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidSpec("dimension must be positive"));
        }
        if self.rows == 0 {
            return Err(Error::InvalidSpec("rows must be positive"));
        }
        if self.range < 2 {
            return Err(Error::InvalidSpec("range must be at least 2"));
        }
        match self.kind {
            HashKind::EuclideanPStable { bandwidth } => {
                if !(bandwidth.is_finite() && bandwidth > 0.0) {
                    return Err(Error::InvalidSpec("bandwidth must be positive and finite"));
                }
            }
            HashKind::CosineSignedProjection { bits } => {
                if bits == 0 || bits > 32 {
                    return Err(Error::InvalidSpec("bits must be in 1..=32"));
                }
            }
        }
        Ok(())
    }

    /// Closed-form probability that `x` and `y` share a raw (pre-modulo)
    /// index in one row. This is the kernel the sketch estimates sums of.
    pub fn collision_probability(&self, x: &[f32], y: &[f32]) -> Result<f64> {
        check_dim(self.dimension, x)?;
        check_dim(self.dimension, y)?;
        Ok(match self.kind {
            HashKind::EuclideanPStable { bandwidth } => pstable_collision(distance(x, y), bandwidth),
            HashKind::CosineSignedProjection { bits } => {
                libm::pow(1.0 - angle(x, y) / PI, f64::from(bits))
            }
        })
    }
}

/// Collision probability of Gaussian p-stable hashing at distance `dist`
/// with bucket width `bandwidth`.
///
/// With `t = bandwidth / dist`:
/// `p = 1 − 2Φ(−t) − 2 / (√(2π) t) · (1 − exp(−t²/2))`.
pub fn pstable_collision(dist: f64, bandwidth: f64) -> f64 {
    if dist == 0.0 {
        return 1.0;
    }
    if !dist.is_finite() {
        return 0.0;
    }
    let t = bandwidth / dist;
    // 1 − 2Φ(−t) = erf(t / √2)
    let p = libm::erf(t / SQRT_2) - 2.0 / (libm::sqrt(2.0 * PI) * t) * (1.0 - libm::exp(-t * t / 2.0));
    p.clamp(0.0, 1.0)
}

/// A materialized hash family: per-row projections and offsets.
///
/// Immutable after construction and freely shareable between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct HashFamily {
    spec: HashFamilySpec,
    per_row: usize,
    /// `rows × per_row × dimension`, row-major.
    projections: Vec<f64>,
    /// One offset per row; all zero for the cosine family.
    offsets: Vec<f64>,
}

impl HashFamily {
    pub fn new(spec: HashFamilySpec) -> Result<Self> {
        spec.validate()?;
        let per_row = spec.kind.projections_per_row();
        let d = spec.dimension;
        let len = spec
            .rows
            .checked_mul(per_row * d)
            .ok_or(Error::Allocation { bytes: usize::MAX })?;
        let mut projections = Vec::new();
        projections
            .try_reserve_exact(len)
            .map_err(|_| Error::Allocation { bytes: len.saturating_mul(8) })?;
        let mut offsets = Vec::new();
        offsets
            .try_reserve_exact(spec.rows)
            .map_err(|_| Error::Allocation { bytes: spec.rows.saturating_mul(8) })?;
        for row in 0..spec.rows {
            let mut rng = stream_rng(spec.seed, row as u64);
            projections.extend((0..per_row * d).map(|_| rng.sample::<f64, _>(StandardNormal)));
            offsets.push(match spec.kind {
                HashKind::EuclideanPStable { bandwidth } => rng.random::<f64>() * bandwidth,
                HashKind::CosineSignedProjection { .. } => 0.0,
            });
        }
        Ok(Self {
            spec,
            per_row,
            projections,
            offsets,
        })
    }

    pub fn spec(&self) -> &HashFamilySpec {
        &self.spec
    }

    pub fn rows(&self) -> usize {
        self.spec.rows
    }

    pub fn range(&self) -> u32 {
        self.spec.range
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    /// Projection vector `j` of `row` (`j` is always 0 for the p-stable family).
    pub fn projection(&self, row: usize, j: usize) -> &[f64] {
        let d = self.spec.dimension;
        let start = (row * self.per_row + j) * d;
        &self.projections[start..start + d]
    }

    pub fn offset(&self, row: usize) -> f64 {
        self.offsets[row]
    }

    /// Index of `x` in `row` before range reduction.
    pub fn raw_index(&self, row: usize, x: &[f32]) -> Result<i64> {
        self.check_row(row)?;
        check_dim(self.spec.dimension, x)?;
        Ok(self.raw_unchecked(row, x))
    }

    /// Bucket of `x` in `row`, in `[0, B)`.
    pub fn hash_row(&self, row: usize, x: &[f32]) -> Result<u32> {
        self.check_row(row)?;
        check_dim(self.spec.dimension, x)?;
        Ok(self.bucket_unchecked(row, x))
    }

    /// Buckets of `x` in every row.
    pub fn buckets(&self, x: &[f32]) -> Result<Vec<u32>> {
        check_dim(self.spec.dimension, x)?;
        Ok((0..self.spec.rows).map(|r| self.bucket_unchecked(r, x)).collect())
    }

    pub(crate) fn bucket_unchecked(&self, row: usize, x: &[f32]) -> u32 {
        self.raw_unchecked(row, x).rem_euclid(i64::from(self.spec.range)) as u32
    }

    fn raw_unchecked(&self, row: usize, x: &[f32]) -> i64 {
        match self.spec.kind {
            HashKind::EuclideanPStable { bandwidth } => {
                let proj = dot(self.projection(row, 0), x);
                libm::floor((proj + self.offsets[row]) / bandwidth) as i64
            }
            HashKind::CosineSignedProjection { bits } => {
                let mut code = 0i64;
                for j in 0..bits as usize {
                    if dot(self.projection(row, j), x) >= 0.0 {
                        code |= 1 << j;
                    }
                }
                code
            }
        }
    }

    fn check_row(&self, row: usize) -> Result<()> {
        if row >= self.spec.rows {
            return Err(Error::RowOutOfRange {
                row,
                rows: self.spec.rows,
            });
        }
        Ok(())
    }
}

/// Median pairwise Euclidean distance over a seeded subsample of at most
/// `sample` points. Used as the default p-stable bandwidth.
pub fn median_pairwise_distance<V: AsRef<[f32]>>(points: &[V], sample: usize, seed: u64) -> Result<f64> {
    if points.len() < 2 || sample < 2 {
        return Err(Error::TooFew {
            needed: 2,
            got: points.len().min(sample),
        });
    }
    let dim = points[0].as_ref().len();
    for p in points {
        check_dim(dim, p.as_ref())?;
    }
    let chosen: Vec<usize> = if points.len() <= sample {
        (0..points.len()).collect()
    } else {
        let mut rng = stream_rng(seed, u64::MAX);
        let mut idx = index::sample(&mut rng, points.len(), sample).into_vec();
        idx.sort_unstable();
        idx
    };
    let mut dists = Vec::with_capacity(chosen.len() * (chosen.len() - 1) / 2);
    for (a, &i) in chosen.iter().enumerate() {
        for &j in &chosen[a + 1..] {
            dists.push(distance(points[i].as_ref(), points[j].as_ref()));
        }
    }
    let median = median(&mut dists);
    if median.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater) {
        return Err(Error::InvalidArgument("median pairwise distance is zero"));
    }
    Ok(median)
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, &mut upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    }
}

fn check_dim(expected: usize, x: &[f32]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

#[inline]
fn dot(w: &[f64], x: &[f32]) -> f64 {
    w.iter().zip(x).map(|(a, &b)| a * f64::from(b)).sum()
}

pub fn distance(x: &[f32], y: &[f32]) -> f64 {
    libm::sqrt(
        x.iter()
            .zip(y)
            .map(|(&a, &b)| {
                let d = f64::from(a) - f64::from(b);
                d * d
            })
            .sum(),
    )
}

/// Angle between two vectors; a zero vector is taken to be orthogonal to
/// everything except itself.
fn angle(x: &[f32], y: &[f32]) -> f64 {
    let nx = libm::sqrt(x.iter().map(|&v| f64::from(v) * f64::from(v)).sum());
    let ny = libm::sqrt(y.iter().map(|&v| f64::from(v) * f64::from(v)).sum());
    if x == y {
        return 0.0;
    }
    if nx == 0.0 || ny == 0.0 {
        return PI / 2.0;
    }
    let cos: f64 = x.iter().zip(y).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum::<f64>() / (nx * ny);
    libm::acos(cos.clamp(-1.0, 1.0))
}
