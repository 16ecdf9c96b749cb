//! Corpus manifests and streaming readers over their shards.
//!
//! A manifest is a JSON file:
//!
//! ```json
//! {
//!   "dimension": 768,
//!   "normalize": false,
//!   "total_tokens": 1200,
//!   "text_shards": [{ "path": "text-000.jsonl", "records": 3 }],
//!   "embedding_shards": [{ "path": "emb-000.bin", "records": 3 }]
//! }
//! ```
//!
//! Relative shard paths resolve against the manifest's directory. Text shards
//! hold one `{"id", "text", "token_count"?}` object per line; embedding shards
//! use the binary layout in [`crate::formats::embeddings`].

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::{Path, PathBuf};

use curata_core::{EmbeddingRecord, ExampleRecord};
use serde::{Deserialize, Serialize};

use crate::formats::embeddings::EmbeddingReader;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardEntry {
    pub path: PathBuf,
    pub records: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    /// Embedding dimension; required when embedding shards are listed.
    #[serde(default)]
    pub dimension: Option<usize>,
    /// Scale embeddings to unit length before density estimation.
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub total_tokens: Option<u64>,
    #[serde(default)]
    pub text_shards: Vec<ShardEntry>,
    #[serde(default)]
    pub embedding_shards: Vec<ShardEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl CorpusManifest {
    pub fn new(dimension: Option<usize>) -> Self {
        Self {
            dimension,
            normalize: false,
            total_tokens: None,
            text_shards: Vec::new(),
            embedding_shards: Vec::new(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(Error::io(path))?;
        let mut manifest: CorpusManifest = serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if !manifest.embedding_shards.is_empty() && manifest.dimension.unwrap_or(0) == 0 {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line: 0,
                message: "manifest lists embedding shards but no positive dimension".into(),
            });
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n").map_err(Error::io(path))
    }

    /// Directory relative shard paths resolve against.
    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn resolve(&self, shard: &ShardEntry) -> PathBuf {
        if shard.path.is_absolute() {
            shard.path.clone()
        } else {
            self.base_dir.join(&shard.path)
        }
    }

    pub fn example_count(&self) -> u64 {
        self.text_shards.iter().map(|s| s.records).sum()
    }

    pub fn embedding_count(&self) -> u64 {
        self.embedding_shards.iter().map(|s| s.records).sum()
    }

    pub fn dimension(&self) -> Result<usize> {
        self.dimension
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::Usage("manifest has no embedding dimension".into()))
    }

    /// Examples in shard-then-line order. Errors end the stream.
    pub fn load_examples(&self) -> ExampleStream<'_> {
        ExampleStream {
            manifest: self,
            shard: 0,
            current: None,
            seen: HashSet::new(),
            done: false,
        }
    }

    /// Embeddings of one shard, checked against the manifest.
    pub fn embedding_shard(&self, index: usize) -> Result<ShardEmbeddings> {
        let entry = &self.embedding_shards[index];
        let path = self.resolve(entry);
        let reader = EmbeddingReader::open(&path)?;
        let expected = self.dimension()?;
        if reader.dimension() != expected {
            return Err(Error::DimensionMismatch {
                path,
                expected,
                found: reader.dimension(),
            });
        }
        if reader.record_count() != entry.records {
            return Err(Error::CountMismatch {
                path,
                expected: entry.records,
                found: reader.record_count(),
            });
        }
        Ok(ShardEmbeddings {
            reader,
            normalize: self.normalize,
        })
    }

    /// Embeddings of every shard in order, with duplicate-id detection.
    pub fn load_embeddings(&self) -> EmbeddingStream<'_> {
        EmbeddingStream {
            manifest: self,
            shard: 0,
            current: None,
            seen: HashSet::new(),
            done: false,
        }
    }
}

pub struct ShardEmbeddings {
    reader: EmbeddingReader,
    normalize: bool,
}

impl ShardEmbeddings {
    pub fn path(&self) -> &Path {
        self.reader.path()
    }
}

impl Iterator for ShardEmbeddings {
    type Item = Result<EmbeddingRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        let normalize = self.normalize;
        self.reader.next().map(|r| {
            r.map(|mut e| {
                if normalize {
                    e.normalize();
                }
                e
            })
        })
    }
}

pub struct EmbeddingStream<'a> {
    manifest: &'a CorpusManifest,
    shard: usize,
    current: Option<(ShardEmbeddings, usize)>,
    seen: HashSet<String>,
    done: bool,
}

impl Iterator for EmbeddingStream<'_> {
    type Item = Result<EmbeddingRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            if self.current.is_none() {
                if self.shard >= self.manifest.embedding_shards.len() {
                    self.done = true;
                    return None;
                }
                match self.manifest.embedding_shard(self.shard) {
                    Ok(s) => self.current = Some((s, 0)),
                    Err(e) => {
                        self.done = true;
                        return Some(Err(e));
                    }
                }
                self.shard += 1;
            }
            let (shard, index) = self.current.as_mut().expect("set above");
            match shard.next() {
                Some(Ok(e)) => {
                    *index += 1;
                    if !self.seen.insert(e.id.clone()) {
                        self.done = true;
                        return Some(Err(Error::DuplicateId {
                            path: shard.path().to_path_buf(),
                            line: *index,
                            id: e.id,
                        }));
                    }
                    return Some(Ok(e));
                }
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e));
                }
                None => self.current = None,
            }
        }
    }
}

#[derive(Deserialize)]
struct TextLine {
    id: String,
    text: String,
    #[serde(default)]
    token_count: Option<u64>,
}

struct OpenShard {
    path: PathBuf,
    lines: Lines<BufReader<File>>,
    line: usize,
    records: u64,
    expected: u64,
}

pub struct ExampleStream<'a> {
    manifest: &'a CorpusManifest,
    shard: usize,
    current: Option<OpenShard>,
    seen: HashSet<String>,
    done: bool,
}

impl ExampleStream<'_> {
    fn fail(&mut self, e: Error) -> Option<Result<ExampleRecord>> {
        self.done = true;
        Some(Err(e))
    }
}

impl Iterator for ExampleStream<'_> {
    type Item = Result<ExampleRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            if self.current.is_none() {
                let Some(entry) = self.manifest.text_shards.get(self.shard) else {
                    self.done = true;
                    return None;
                };
                self.shard += 1;
                let path = self.manifest.resolve(entry);
                let file = match File::open(&path) {
                    Ok(f) => f,
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                        return self.fail(Error::MissingShard(path));
                    }
                    Err(e) => return self.fail(Error::Io { path, source: e }),
                };
                self.current = Some(OpenShard {
                    path,
                    lines: BufReader::new(file).lines(),
                    line: 0,
                    records: 0,
                    expected: entry.records,
                });
            }
            let shard = self.current.as_mut().expect("set above");
            match shard.lines.next() {
                None => {
                    let shard = self.current.take().expect("present");
                    if shard.records != shard.expected {
                        return self.fail(Error::CountMismatch {
                            path: shard.path,
                            expected: shard.expected,
                            found: shard.records,
                        });
                    }
                }
                Some(Err(e)) => {
                    let path = shard.path.clone();
                    return self.fail(Error::Io { path, source: e });
                }
                Some(Ok(line)) => {
                    shard.line += 1;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let (path, lineno) = (shard.path.clone(), shard.line);
                    let parsed: TextLine = match serde_json::from_str(&line) {
                        Ok(p) => p,
                        Err(e) => {
                            return self.fail(Error::Malformed {
                                path,
                                line: lineno,
                                message: e.to_string(),
                            })
                        }
                    };
                    if parsed.id.is_empty() {
                        return self.fail(Error::Malformed {
                            path,
                            line: lineno,
                            message: "empty id".into(),
                        });
                    }
                    if !self.seen.insert(parsed.id.clone()) {
                        return self.fail(Error::DuplicateId {
                            path,
                            line: lineno,
                            id: parsed.id,
                        });
                    }
                    shard.records += 1;
                    return Some(Ok(ExampleRecord {
                        id: parsed.id,
                        text: parsed.text,
                        token_count: parsed.token_count,
                    }));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_shard(dir: &Path, name: &str, ids: &[&str]) -> ShardEntry {
        let body: String = ids
            .iter()
            .map(|id| format!("{{\"id\":\"{id}\",\"text\":\"text of {id}\",\"token_count\":3}}\n"))
            .collect();
        fs::write(dir.join(name), body).unwrap();
        ShardEntry {
            path: name.into(),
            records: ids.len() as u64,
        }
    }

    fn manifest(dir: &Path, shards: Vec<ShardEntry>) -> CorpusManifest {
        let mut m = CorpusManifest::new(None).with_base_dir(dir);
        m.text_shards = shards;
        m
    }

    #[test]
    fn single_shard_in_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(dir.path(), vec![write_shard(dir.path(), "a.jsonl", &["x", "y", "z"])]);
        let ids: Vec<String> = m.load_examples().map(|r| r.unwrap().id).collect();
        assert_eq!(ids, ["x", "y", "z"]);
        let first = m.load_examples().next().unwrap().unwrap();
        assert_eq!(first.token_count, Some(3));
        assert_eq!(first.text, "text of x");
    }

    #[test]
    fn shards_in_manifest_order() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(
            dir.path(),
            vec![
                write_shard(dir.path(), "0.jsonl", &["a", "b"]),
                write_shard(dir.path(), "1.jsonl", &["c", "d", "e"]),
            ],
        );
        let ids: Vec<String> = m.load_examples().map(|r| r.unwrap().id).collect();
        assert_eq!(ids, ["a", "b", "c", "d", "e"]);
        let again: Vec<String> = m.load_examples().map(|r| r.unwrap().id).collect();
        assert_eq!(ids, again);
        assert_eq!(m.example_count(), 5);
    }

    #[test]
    fn missing_shard_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(
            dir.path(),
            vec![ShardEntry {
                path: "absent.jsonl".into(),
                records: 1,
            }],
        );
        let err = m.load_examples().next().unwrap().unwrap_err();
        assert!(matches!(&err, Error::MissingShard(p) if p.ends_with("absent.jsonl")));
        assert!(err.to_string().contains("absent.jsonl"));
        assert!(m.load_examples().nth(1).is_none());
    }

    #[test]
    fn malformed_line_reports_shard_and_line() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("bad.jsonl"), "{\"id\":\"a\",\"text\":\"ok\"}\n{\"id\":\"b\"}\n").unwrap();
        let m = manifest(
            dir.path(),
            vec![ShardEntry {
                path: "bad.jsonl".into(),
                records: 2,
            }],
        );
        let results: Vec<_> = m.load_examples().collect();
        assert_eq!(results.len(), 2);
        match &results[1] {
            Err(Error::Malformed { path, line, .. }) => {
                assert!(path.ends_with("bad.jsonl"));
                assert_eq!(*line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_are_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(
            dir.path(),
            vec![
                write_shard(dir.path(), "0.jsonl", &["a", "b"]),
                write_shard(dir.path(), "1.jsonl", &["b"]),
            ],
        );
        let err = m.load_examples().find_map(|r| r.err()).unwrap();
        assert!(matches!(err, Error::DuplicateId { ref id, line: 1, .. } if id == "b"));
    }

    #[test]
    fn count_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let mut entry = write_shard(dir.path(), "0.jsonl", &["a", "b"]);
        entry.records = 3;
        let m = manifest(dir.path(), vec![entry]);
        let err = m.load_examples().find_map(|r| r.err()).unwrap();
        assert!(matches!(err, Error::CountMismatch { expected: 3, found: 2, .. }));
    }

    #[test]
    fn manifest_round_trips_and_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest(dir.path(), vec![write_shard(dir.path(), "0.jsonl", &["a"])]);
        m.dimension = Some(4);
        m.total_tokens = Some(3);
        let path = dir.path().join("manifest.json");
        m.save(&path).unwrap();
        let loaded = CorpusManifest::load(&path).unwrap();
        assert_eq!(loaded, m);
        assert_eq!(loaded.resolve(&loaded.text_shards[0]), dir.path().join("0.jsonl"));
        assert_eq!(loaded.load_examples().count(), 1);
    }
}
