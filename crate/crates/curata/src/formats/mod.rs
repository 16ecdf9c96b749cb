//! On-disk formats. All binary formats are little-endian.

pub mod embeddings;
pub mod scores;
pub mod selection;
pub mod sketch;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::{Error, Result};

/// Writes through a sibling temp file and renames it into place, so readers
/// never observe a half-written file.
pub(crate) fn write_atomically(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".into(),
    });
    let file = File::create(&tmp).map_err(Error::io(&tmp))?;
    let mut out = BufWriter::new(file);
    write(&mut out)
        .and_then(|_| out.flush())
        .map_err(Error::io(&tmp))?;
    drop(out);
    fs::rename(&tmp, path).map_err(Error::io(path))
}
