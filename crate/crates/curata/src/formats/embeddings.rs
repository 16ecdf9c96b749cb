//! Embedding shards.
//!
//! ```text
//! "EMB1"  u32 dimension  u64 count
//! count × ( u32 id_len  id bytes (UTF-8)  dimension × f32 )
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use curata_core::EmbeddingRecord;

use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";
const MAX_ID_LEN: u32 = 1 << 20;

/// Streaming reader over one shard. Yields exactly `count` records, then
/// checks that nothing trails them.
pub struct EmbeddingReader {
    path: PathBuf,
    input: BufReader<File>,
    dimension: usize,
    count: u64,
    read: u64,
    failed: bool,
}

fn truncated(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            Error::Truncated {
                path: path.to_path_buf(),
            }
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    }
}

impl EmbeddingReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(Error::MissingShard(path)),
            Err(e) => return Err(Error::Io { path, source: e }),
        };
        let mut input = BufReader::new(file);
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic).map_err(truncated(&path))?;
        if &magic != MAGIC {
            return Err(Error::BadMagic { path, expected: "EMB1" });
        }
        let dimension = input.read_u32::<LittleEndian>().map_err(truncated(&path))? as usize;
        let count = input.read_u64::<LittleEndian>().map_err(truncated(&path))?;
        if dimension == 0 {
            return Err(Error::Malformed {
                path,
                line: 0,
                message: "zero dimension in header".into(),
            });
        }
        Ok(Self {
            path,
            input,
            dimension,
            count,
            read: 0,
            failed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn record_count(&self) -> u64 {
        self.count
    }

    fn read_record(&mut self) -> Result<EmbeddingRecord> {
        let path = self.path.clone();
        let id_len = self.input.read_u32::<LittleEndian>().map_err(truncated(&path))?;
        if id_len == 0 || id_len > MAX_ID_LEN {
            return Err(Error::Malformed {
                path,
                line: self.read as usize + 1,
                message: format!("invalid id length {id_len}"),
            });
        }
        let mut id = vec![0u8; id_len as usize];
        self.input.read_exact(&mut id).map_err(truncated(&path))?;
        let id = String::from_utf8(id).map_err(|_| Error::Malformed {
            path: path.clone(),
            line: self.read as usize + 1,
            message: "id is not UTF-8".into(),
        })?;
        let mut vector = vec![0f32; self.dimension];
        self.input
            .read_f32_into::<LittleEndian>(&mut vector)
            .map_err(truncated(&path))?;
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { path, id });
        }
        Ok(EmbeddingRecord { id, vector })
    }
}

impl Iterator for EmbeddingReader {
    type Item = Result<EmbeddingRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        if self.read == self.count {
            self.failed = true;
            let mut probe = [0u8; 1];
            return match self.input.read(&mut probe) {
                Ok(0) => None,
                Ok(_) => Some(Err(Error::Malformed {
                    path: self.path.clone(),
                    line: self.count as usize + 1,
                    message: "trailing data after the declared record count".into(),
                })),
                Err(e) => Some(Err(Error::Io {
                    path: self.path.clone(),
                    source: e,
                })),
            };
        }
        let r = self.read_record();
        self.read += 1;
        if r.is_err() {
            self.failed = true;
        }
        Some(r)
    }
}

/// Appends records to a new shard; [`finish`](Self::finish) patches the
/// record count into the header.
pub struct EmbeddingWriter {
    path: PathBuf,
    out: BufWriter<File>,
    dimension: usize,
    count: u64,
}

impl EmbeddingWriter {
    pub fn create(path: impl AsRef<Path>, dimension: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(Error::io(&path))?;
        let mut out = BufWriter::new(file);
        let header = (|| -> io::Result<()> {
            out.write_all(MAGIC)?;
            out.write_u32::<LittleEndian>(dimension as u32)?;
            out.write_u64::<LittleEndian>(0)
        })();
        header.map_err(Error::io(&path))?;
        Ok(Self {
            path,
            out,
            dimension,
            count: 0,
        })
    }

    pub fn write(&mut self, record: &EmbeddingRecord) -> Result<()> {
        if record.vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                path: self.path.clone(),
                expected: self.dimension,
                found: record.vector.len(),
            });
        }
        if record.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                path: self.path.clone(),
                id: record.id.clone(),
            });
        }
        let out = &mut self.out;
        (|| -> io::Result<()> {
            out.write_u32::<LittleEndian>(record.id.len() as u32)?;
            out.write_all(record.id.as_bytes())?;
            for &v in &record.vector {
                out.write_f32::<LittleEndian>(v)?;
            }
            Ok(())
        })()
        .map_err(Error::io(&self.path))?;
        self.count += 1;
        Ok(())
    }

    /// Returns the number of records written.
    pub fn finish(mut self) -> Result<u64> {
        let path = self.path.clone();
        (|| -> io::Result<()> {
            self.out.flush()?;
            let file = self.out.get_mut();
            file.seek(SeekFrom::Start(8))?;
            file.write_u64::<LittleEndian>(self.count)?;
            file.sync_all()
        })()
        .map_err(Error::io(&path))?;
        Ok(self.count)
    }
}

/// Writes a whole shard in one call.
pub fn write_embeddings(path: impl AsRef<Path>, dimension: usize, records: &[EmbeddingRecord]) -> Result<u64> {
    let mut w = EmbeddingWriter::create(path, dimension)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<Vec<EmbeddingRecord>> {
    EmbeddingReader::open(path)?.collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_vector() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.bin");
        write_embeddings(&p, 2, &[EmbeddingRecord::new("a", vec![1.0, 0.0])]).unwrap();
        assert_eq!(read_embeddings(&p).unwrap(), vec![EmbeddingRecord::new("a", vec![1.0, 0.0])]);
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"EMB1");
        assert_eq!(bytes.len(), 4 + 4 + 8 + 4 + 1 + 8);
    }

    #[test]
    fn random_vectors_round_trip_bit_identically() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.bin");
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let recs: Vec<EmbeddingRecord> = (0..100)
            .map(|i| {
                EmbeddingRecord::new(
                    format!("id-{i}"),
                    (0..16).map(|_| f32::from_bits(rng.random::<u32>() & 0xbf7f_ffff)).collect(),
                )
            })
            .collect();
        write_embeddings(&p, 16, &recs).unwrap();
        let back = read_embeddings(&p).unwrap();
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            let bits_a: Vec<u32> = a.vector.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u32> = b.vector.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn truncated_and_corrupt_shards() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.bin");
        write_embeddings(&p, 3, &[EmbeddingRecord::new("a", vec![1.0, 2.0, 3.0])]).unwrap();
        let bytes = std::fs::read(&p).unwrap();

        std::fs::write(&p, &bytes[..bytes.len() - 2]).unwrap();
        let err = read_embeddings(&p).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }), "{err}");

        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&p, &bad).unwrap();
        assert!(matches!(EmbeddingReader::open(&p), Err(Error::BadMagic { .. })));

        let mut trailing = bytes.clone();
        trailing.push(0);
        std::fs::write(&p, &trailing).unwrap();
        assert!(matches!(read_embeddings(&p), Err(Error::Malformed { .. })));

        let mut nan = bytes.clone();
        let n = nan.len();
        nan[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        std::fs::write(&p, &nan).unwrap();
        assert!(matches!(read_embeddings(&p), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn writer_rejects_wrong_dimension() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = EmbeddingWriter::create(dir.path().join("e.bin"), 3).unwrap();
        assert!(matches!(
            w.write(&EmbeddingRecord::new("a", vec![1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
