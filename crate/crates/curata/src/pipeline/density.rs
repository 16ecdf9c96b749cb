//! Two-pass density scoring over a sharded embedding manifest.
//!
//! Pass 1 builds one sketch per shard in parallel and merges them; pass 2
//! scores every embedding against the merged sketch. With a progress
//! directory each shard of each pass is a resumable unit: its result is
//! written next to a ledger, and a rerun skips finished units.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use curata_core::lsh::median_pairwise_distance;
use curata_core::rng::stream_rng;
use curata_core::scoring::density_scorer_id;
use curata_core::{EmbeddingRecord, HashFamily, HashFamilySpec, KdeSketch, ScoreRecord};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::formats::scores::{read_scores, write_scores};
use crate::formats::sketch::{read_sketch, write_sketch};
use crate::formats::write_atomically;
use crate::manifest::CorpusManifest;
use crate::{Error, Result};

pub const PROGRESS_DIR: &str = ".progress";

/// Points drawn for the median-distance bandwidth.
pub const BANDWIDTH_SAMPLE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `None` picks the median pairwise distance of a seeded subsample.
    Euclidean { bandwidth: Option<f64> },
    Cosine { bits: u32 },
}

impl Kernel {
    /// The hash family spec for `manifest`, estimating the bandwidth if
    /// needed. Also returns the records read while estimating.
    pub fn resolve(self, manifest: &CorpusManifest, rows: usize, range: u32, seed: u64) -> Result<(HashFamilySpec, u64)> {
        let dimension = manifest.dimension()?;
        let (spec, read) = match self {
            Kernel::Euclidean { bandwidth: Some(b) } => (HashFamilySpec::euclidean(dimension, b, rows, range, seed), 0),
            Kernel::Euclidean { bandwidth: None } => {
                let (b, read) = estimate_bandwidth(manifest, BANDWIDTH_SAMPLE, seed)?;
                (HashFamilySpec::euclidean(dimension, b, rows, range, seed), read)
            }
            Kernel::Cosine { bits } => (HashFamilySpec::cosine(dimension, bits, rows, range, seed), 0),
        };
        spec.validate()?;
        Ok((spec, read))
    }
}

/// Records read per pass.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct PassCounters {
    pub bandwidth: u64,
    pub build: u64,
    pub score: u64,
}

impl PassCounters {
    /// Full linear passes over `total` records.
    pub fn passes(&self, total: u64) -> f64 {
        if total == 0 {
            return 0.0;
        }
        (self.bandwidth + self.build + self.score) as f64 / total as f64
    }
}

#[derive(Debug)]
pub struct DensityOutput {
    pub sketch: KdeSketch,
    /// Raw scores in manifest order.
    pub scores: Vec<ScoreRecord>,
    pub counters: PassCounters,
}

/// Median pairwise distance of `sample` embeddings chosen uniformly by
/// position. Returns the bandwidth and the number of records read.
pub fn estimate_bandwidth(manifest: &CorpusManifest, sample: usize, seed: u64) -> Result<(f64, u64)> {
    let n = manifest.embedding_count();
    let n_usize = usize::try_from(n).map_err(|_| Error::Usage("manifest too large".into()))?;
    let chosen: HashSet<usize> = if n_usize <= sample {
        (0..n_usize).collect()
    } else {
        let mut rng = stream_rng(seed, u64::MAX - 1);
        index::sample(&mut rng, n_usize, sample).into_iter().collect()
    };
    let mut points = Vec::with_capacity(chosen.len());
    let mut read = 0;
    for (i, e) in manifest.load_embeddings().enumerate() {
        let e = e?;
        read += 1;
        if chosen.contains(&i) {
            points.push(e.vector);
        }
    }
    Ok((median_pairwise_distance(&points, points.len(), seed)?, read))
}

/// Runs both passes in memory.
pub fn density_score_all(manifest: &CorpusManifest, spec: HashFamilySpec) -> Result<DensityOutput> {
    DensityRun::new(manifest, spec).run()
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Ledger {
    run: String,
    built: BTreeSet<usize>,
    scored: BTreeSet<usize>,
}

struct Progress {
    dir: PathBuf,
    ledger: Mutex<Ledger>,
    /// Units this invocation may still run.
    budget: Option<AtomicUsize>,
}

impl Progress {
    fn built_path(&self, shard: usize) -> PathBuf {
        self.dir.join(format!("build-{shard:05}.sketch"))
    }

    fn scored_path(&self, shard: usize) -> PathBuf {
        self.dir.join(format!("scores-{shard:05}.jsonl"))
    }

    fn take_unit(&self) -> Result<()> {
        match &self.budget {
            Some(b) if b.fetch_update(Ordering::SeqCst, Ordering::SeqCst, |v| v.checked_sub(1)).is_err() => {
                Err(Error::Interrupted)
            }
            _ => Ok(()),
        }
    }

    fn record(&self, update: impl FnOnce(&mut Ledger)) -> Result<()> {
        let mut ledger = self.ledger.lock().expect("ledger lock");
        update(&mut ledger);
        save_ledger(&self.dir, &ledger)
    }
}

fn save_ledger(dir: &Path, ledger: &Ledger) -> Result<()> {
    write_atomically(&dir.join("ledger.json"), |out| {
        serde_json::to_writer_pretty(&mut *out, ledger).map_err(std::io::Error::other)
    })
}

/// A density scoring run, optionally checkpointed.
pub struct DensityRun<'a> {
    manifest: &'a CorpusManifest,
    spec: HashFamilySpec,
    progress: Option<Progress>,
}

impl<'a> DensityRun<'a> {
    pub fn new(manifest: &'a CorpusManifest, spec: HashFamilySpec) -> Self {
        Self {
            manifest,
            spec,
            progress: None,
        }
    }

    /// Checkpoints under `dir`. With `resume`, finished units recorded there
    /// by an identical run are reused; otherwise the directory is reset.
    /// `max_units` stops the run with [`Error::Interrupted`] after that many
    /// units.
    pub fn checkpoint(mut self, dir: impl Into<PathBuf>, resume: bool, max_units: Option<usize>) -> Result<Self> {
        let dir = dir.into();
        let run = self.run_key();
        let ledger_path = dir.join("ledger.json");
        let ledger = if resume && ledger_path.exists() {
            let text = fs::read_to_string(&ledger_path).map_err(Error::io(&ledger_path))?;
            let ledger: Ledger = serde_json::from_str(&text).map_err(|e| Error::Malformed {
                path: ledger_path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?;
            if ledger.run != run {
                return Err(Error::Usage(format!(
                    "{} was written by a different run; rerun without --resume",
                    ledger_path.display()
                )));
            }
            ledger
        } else {
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(Error::io(&dir))?;
            }
            fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
            let ledger = Ledger {
                run,
                ..Ledger::default()
            };
            save_ledger(&dir, &ledger)?;
            ledger
        };
        self.progress = Some(Progress {
            dir,
            ledger: Mutex::new(ledger),
            budget: max_units.map(AtomicUsize::new),
        });
        Ok(self)
    }

    fn run_key(&self) -> String {
        let shards: Vec<String> = self
            .manifest
            .embedding_shards
            .iter()
            .map(|s| format!("{}:{}", s.path.display(), s.records))
            .collect();
        format!(
            "{}|{:?}|normalize={}|{}",
            density_scorer_id(&self.spec),
            self.spec,
            self.manifest.normalize,
            shards.join(",")
        )
    }

    pub fn run(self) -> Result<DensityOutput> {
        let dimension = self.manifest.dimension()?;
        if dimension != self.spec.dimension {
            return Err(Error::Core(curata_core::Error::DimensionMismatch {
                expected: self.spec.dimension,
                got: dimension,
            }));
        }
        if self.manifest.embedding_count() == 0 {
            return Err(Error::Core(curata_core::Error::EmptyInput));
        }
        let family = HashFamily::new(self.spec)?;
        let shards = self.manifest.embedding_shards.len();
        let build_reads = AtomicU64::new(0);
        let score_reads = AtomicU64::new(0);

        let sketch = (0..shards)
            .into_par_iter()
            .map(|i| self.build_shard(i, &family, &build_reads))
            .try_reduce_with(|mut a, b| {
                a.merge_from(&b)?;
                Ok(a)
            })
            .expect("at least one shard")?;

        let per_shard: Vec<Vec<ScoreRecord>> = (0..shards)
            .into_par_iter()
            .map(|i| self.score_shard(i, &sketch, &score_reads))
            .collect::<Result<_>>()?;

        let mut seen = HashSet::with_capacity(sketch.inserted() as usize);
        let mut scores = Vec::with_capacity(sketch.inserted() as usize);
        for (i, shard) in per_shard.into_iter().enumerate() {
            for (line, r) in shard.into_iter().enumerate() {
                if !seen.insert(r.id.clone()) {
                    return Err(Error::DuplicateId {
                        path: self.manifest.resolve(&self.manifest.embedding_shards[i]),
                        line: line + 1,
                        id: r.id,
                    });
                }
                scores.push(r);
            }
        }
        Ok(DensityOutput {
            sketch,
            scores,
            counters: PassCounters {
                bandwidth: 0,
                build: build_reads.into_inner(),
                score: score_reads.into_inner(),
            },
        })
    }

    fn read_shard(&self, i: usize, reads: &AtomicU64) -> Result<Vec<EmbeddingRecord>> {
        let records = self.manifest.embedding_shard(i)?.collect::<Result<Vec<_>>>()?;
        reads.fetch_add(records.len() as u64, Ordering::Relaxed);
        Ok(records)
    }

    fn build_shard(&self, i: usize, family: &HashFamily, reads: &AtomicU64) -> Result<KdeSketch> {
        if let Some(p) = &self.progress {
            if p.ledger.lock().expect("ledger lock").built.contains(&i) {
                return read_sketch(p.built_path(i));
            }
            p.take_unit()?;
        }
        let mut sketch = KdeSketch::from_family(family.clone())?;
        for e in self.read_shard(i, reads)? {
            sketch.add(&e.vector)?;
        }
        if let Some(p) = &self.progress {
            write_sketch(p.built_path(i), &sketch)?;
            p.record(|l| {
                l.built.insert(i);
            })?;
            log::info!("built shard {i}");
        }
        Ok(sketch)
    }

    fn score_shard(&self, i: usize, sketch: &KdeSketch, reads: &AtomicU64) -> Result<Vec<ScoreRecord>> {
        if let Some(p) = &self.progress {
            if p.ledger.lock().expect("ledger lock").scored.contains(&i) {
                return read_scores(p.scored_path(i));
            }
            p.take_unit()?;
        }
        let scorer_id = density_scorer_id(sketch.spec());
        let records = self.read_shard(i, reads)?;
        let scores = records
            .par_iter()
            .map(|e| Ok(ScoreRecord::new(e.id.clone(), scorer_id.clone(), sketch.score(&e.vector)?)))
            .collect::<Result<Vec<_>>>()?;
        if let Some(p) = &self.progress {
            write_scores(p.scored_path(i), &scores)?;
            p.record(|l| {
                l.scored.insert(i);
            })?;
            log::info!("scored shard {i}");
        }
        Ok(scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::embeddings::write_embeddings;
    use crate::manifest::ShardEntry;

    fn fixture(dir: &Path, shards: &[Vec<EmbeddingRecord>]) -> CorpusManifest {
        let mut m = CorpusManifest::new(Some(2));
        for (i, recs) in shards.iter().enumerate() {
            let name = format!("e{i}.emb");
            write_embeddings(dir.join(&name), 2, recs).unwrap();
            m.embedding_shards.push(ShardEntry {
                path: name.into(),
                records: recs.len() as u64,
            });
        }
        m.with_base_dir(dir)
    }

    fn rec(id: &str, x: f32, y: f32) -> EmbeddingRecord {
        EmbeddingRecord::new(id, vec![x, y])
    }

    #[test]
    fn single_vector_scores_one() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path(), &[vec![rec("a", 0.3, -1.0)]]);
        let out = density_score_all(&m, HashFamilySpec::euclidean(2, 1.0, 50, 100, 1)).unwrap();
        assert_eq!(out.scores.len(), 1);
        assert_eq!(out.scores[0].raw_score, 1.0);
        assert_eq!(out.counters, PassCounters { bandwidth: 0, build: 1, score: 1 });
    }

    #[test]
    fn duplicated_vectors_double_scores() {
        let dir = tempfile::tempdir().unwrap();
        let base: Vec<EmbeddingRecord> = (0..30).map(|i| rec(&format!("a{i}"), i as f32 * 0.1, (i % 7) as f32)).collect();
        let copy: Vec<EmbeddingRecord> = base.iter().map(|e| EmbeddingRecord::new(format!("{}'", e.id), e.vector.clone())).collect();
        let spec = HashFamilySpec::euclidean(2, 1.5, 40, 500, 3);
        let once = density_score_all(&fixture(dir.path(), std::slice::from_ref(&base)), spec).unwrap();
        let twice = density_score_all(&fixture(dir.path(), &[base, copy]), spec).unwrap();
        for (a, b) in once.scores.iter().zip(&twice.scores) {
            assert_eq!(2.0 * a.raw_score, b.raw_score);
        }
    }

    #[test]
    fn duplicates_across_shards_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path(), &[vec![rec("a", 0.0, 0.0)], vec![rec("a", 1.0, 0.0)]]);
        let err = density_score_all(&m, HashFamilySpec::euclidean(2, 1.0, 4, 16, 1)).unwrap_err();
        assert!(matches!(err, Error::DuplicateId { .. }));
        let err = density_score_all(&m, HashFamilySpec::euclidean(3, 1.0, 4, 16, 1)).unwrap_err();
        assert!(matches!(err, Error::Core(curata_core::Error::DimensionMismatch { .. })));
    }

    #[test]
    fn interrupted_run_resumes_to_same_result() {
        let dir = tempfile::tempdir().unwrap();
        let shards: Vec<Vec<EmbeddingRecord>> = (0..4)
            .map(|s| (0..25).map(|i| rec(&format!("s{s}-{i}"), (s * 25 + i) as f32 * 0.05, (i % 5) as f32)).collect())
            .collect();
        let m = fixture(dir.path(), &shards);
        let spec = HashFamilySpec::euclidean(2, 1.0, 30, 200, 9);
        let full = density_score_all(&m, spec).unwrap();

        let progress = dir.path().join("progress");
        for units in [1, 2, 3] {
            let err = DensityRun::new(&m, spec)
                .checkpoint(&progress, units > 1, Some(units))
                .unwrap()
                .run()
                .unwrap_err();
            assert!(matches!(err, Error::Interrupted));
        }
        let resumed = DensityRun::new(&m, spec).checkpoint(&progress, true, None).unwrap().run().unwrap();
        assert_eq!(resumed.sketch, full.sketch);
        assert_eq!(resumed.scores, full.scores);
        assert!(resumed.counters.build + resumed.counters.score < 200);

        let other = HashFamilySpec::euclidean(2, 1.0, 30, 200, 10);
        assert!(matches!(
            DensityRun::new(&m, other).checkpoint(&progress, true, None),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn bandwidth_estimate_reads_everything_once() {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<EmbeddingRecord> = (0..50).map(|i| rec(&format!("p{i}"), i as f32, 0.0)).collect();
        let m = fixture(dir.path(), &[recs]);
        let (lambda, read) = estimate_bandwidth(&m, 1000, 0).unwrap();
        assert_eq!(read, 50);
        // pairwise |i - j| over 0..50: 1225 values, median 15
        assert_eq!(lambda, 15.0);
        let (sub, _) = estimate_bandwidth(&m, 20, 0).unwrap();
        assert!(sub > 5.0 && sub < 30.0);
    }
}
