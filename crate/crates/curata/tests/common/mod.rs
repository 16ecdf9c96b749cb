#![allow(dead_code)]

use std::io::Write;
use std::path::{Path, PathBuf};

use curata::core::EmbeddingRecord;
use curata::formats::embeddings::write_embeddings;
use curata::manifest::{CorpusManifest, ShardEntry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Splits `records` into `shards` contiguous shards and writes a manifest.
pub fn embedding_manifest(dir: &Path, records: &[EmbeddingRecord], shards: usize) -> PathBuf {
    let dim = records[0].vector.len();
    let mut m = CorpusManifest::new(Some(dim));
    let per = records.len().div_ceil(shards);
    for (i, chunk) in records.chunks(per.max(1)).enumerate() {
        let name = format!("emb-{i}.emb");
        write_embeddings(dir.join(&name), dim, chunk).unwrap();
        m.embedding_shards.push(ShardEntry {
            path: name.into(),
            records: chunk.len() as u64,
        });
    }
    let path = dir.join("manifest.json");
    m.save(&path).unwrap();
    path
}

pub fn text_manifest(dir: &Path, examples: &[(String, String)], shards: usize) -> PathBuf {
    let mut m = CorpusManifest::new(None);
    let per = examples.len().div_ceil(shards).max(1);
    for (i, chunk) in examples.chunks(per).enumerate() {
        let name = format!("text-{i}.jsonl");
        let mut f = std::fs::File::create(dir.join(&name)).unwrap();
        for (id, text) in chunk {
            serde_json::to_writer(&mut f, &serde_json::json!({ "id": id, "text": text })).unwrap();
            f.write_all(b"\n").unwrap();
        }
        m.text_shards.push(ShardEntry {
            path: name.into(),
            records: chunk.len() as u64,
        });
    }
    let path = dir.join("manifest.json");
    m.save(&path).unwrap();
    path
}

const WORDS: &[&str] = &[
    "the", "model", "reads", "a", "long", "river", "of", "tokens", "and", "learns", "quiet", "patterns", "from",
    "noisy", "web", "pages", "where", "recipes", "sit", "beside", "proofs",
];

pub fn texts(n: usize, seed: u64) -> Vec<(String, String)> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let len = r.random_range(3..40);
            let words: Vec<&str> = (0..len).map(|_| WORDS[r.random_range(0..WORDS.len())]).collect();
            (format!("doc-{i:04}"), words.join(" "))
        })
        .collect()
}

pub fn gaussian(n: usize, dim: usize, seed: u64) -> Vec<EmbeddingRecord> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let v: Vec<f32> = (0..dim).map(|_| r.sample::<f32, _>(StandardNormal)).collect();
            EmbeddingRecord::new(format!("g{i:06}"), v)
        })
        .collect()
}

/// Two unit squares far apart: `major` points in `[0,1]²` and `minor`
/// points in `[50,51]²`, interleaved by a seeded shuffle of ids.
pub fn two_blobs(major: usize, minor: usize, seed: u64) -> Vec<EmbeddingRecord> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(major + minor);
    for i in 0..major {
        out.push(EmbeddingRecord::new(format!("maj-{i:05}"), vec![r.random::<f32>(), r.random::<f32>()]));
    }
    for i in 0..minor {
        out.push(EmbeddingRecord::new(
            format!("min-{i:05}"),
            vec![50.0 + r.random::<f32>(), 50.0 + r.random::<f32>()],
        ));
    }
    out
}

pub fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}
