//! Sketch files.
//!
//! ```text
//! "KDE1"  u16 version (=1)
//! spec:   u8 kind (0 = euclidean p-stable, 1 = cosine signed projection)
//!         u32 dimension  u32 rows  u32 range  u64 seed
//!         u64 kind parameter (bandwidth as f64 bits, or bit count)
//! u64 inserted
//! rows × range × u32 counts, row-major
//! ```

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use curata_core::{HashFamilySpec, HashKind, KdeSketch};

use super::write_atomically;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"KDE1";
pub const VERSION: u16 = 1;

pub fn write_spec(out: &mut impl Write, spec: &HashFamilySpec) -> io::Result<()> {
    let (kind, param) = match spec.kind {
        HashKind::EuclideanPStable { bandwidth } => (0u8, bandwidth.to_bits()),
        HashKind::CosineSignedProjection { bits } => (1u8, u64::from(bits)),
    };
    out.write_u8(kind)?;
    out.write_u32::<LittleEndian>(spec.dimension as u32)?;
    out.write_u32::<LittleEndian>(spec.rows as u32)?;
    out.write_u32::<LittleEndian>(spec.range)?;
    out.write_u64::<LittleEndian>(spec.seed)?;
    out.write_u64::<LittleEndian>(param)
}

pub fn write_sketch_to(out: &mut impl Write, sketch: &KdeSketch) -> io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_u16::<LittleEndian>(VERSION)?;
    write_spec(out, sketch.spec())?;
    out.write_u64::<LittleEndian>(sketch.inserted())?;
    let mut buf = Vec::with_capacity(64 * 1024);
    for chunk in sketch.counts().chunks(16 * 1024) {
        buf.clear();
        for &c in chunk {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn write_sketch(path: impl AsRef<Path>, sketch: &KdeSketch) -> Result<()> {
    write_atomically(path.as_ref(), |out| write_sketch_to(out, sketch))
}

pub fn read_sketch(path: impl AsRef<Path>) -> Result<KdeSketch> {
    let path = path.as_ref();
    let file = File::open(path).map_err(Error::io(path))?;
    let mut input = BufReader::new(file);
    let eof = |e: io::Error| {
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
    };
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(eof)?;
    if &magic != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "KDE1",
        });
    }
    let version = input.read_u16::<LittleEndian>().map_err(eof)?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            version,
        });
    }
    let kind = input.read_u8().map_err(eof)?;
    let dimension = input.read_u32::<LittleEndian>().map_err(eof)? as usize;
    let rows = input.read_u32::<LittleEndian>().map_err(eof)? as usize;
    let range = input.read_u32::<LittleEndian>().map_err(eof)?;
    let seed = input.read_u64::<LittleEndian>().map_err(eof)?;
    let param = input.read_u64::<LittleEndian>().map_err(eof)?;
    let kind = match kind {
        0 => HashKind::EuclideanPStable {
            bandwidth: f64::from_bits(param),
        },
        1 => HashKind::CosineSignedProjection {
            bits: u32::try_from(param).unwrap_or(0),
        },
        other => {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line: 0,
                message: format!("unknown hash kind {other}"),
            })
        }
    };
    let spec = HashFamilySpec {
        kind,
        dimension,
        rows,
        range,
        seed,
    };
    spec.validate()?;
    let inserted = input.read_u64::<LittleEndian>().map_err(eof)?;
    let mut counts = vec![0u32; rows * range as usize];
    input.read_u32_into::<LittleEndian>(&mut counts).map_err(eof)?;
    let mut probe = [0u8; 1];
    if input.read(&mut probe).map_err(Error::io(path))? != 0 {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            line: 0,
            message: "trailing data after counters".into(),
        });
    }
    Ok(KdeSketch::from_parts(spec, inserted, counts)?)
}
