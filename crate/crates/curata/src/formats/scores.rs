//! Score files: one JSON object per line,
//! `{"id": .., "scorer_id": .., "score": .., "percentile": ..?}`.
//!
//! Scores are written in shortest round-trip decimal form and parsed back
//! exactly, so `read(write(x)) == x` bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use curata_core::record::validate_scores;
use curata_core::ScoreRecord;
use serde::{Deserialize, Serialize};

use super::write_atomically;
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Line<'a> {
    #[serde(borrow)]
    id: std::borrow::Cow<'a, str>,
    #[serde(borrow)]
    scorer_id: std::borrow::Cow<'a, str>,
    score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    percentile: Option<f64>,
}

/// Serializes records to `out`, one line each.
pub fn write_score_lines(out: &mut impl Write, records: &[ScoreRecord]) -> std::io::Result<()> {
    for r in records {
        let line = Line {
            id: (&*r.id).into(),
            scorer_id: (&*r.scorer_id).into(),
            score: r.raw_score,
            percentile: r.percentile,
        };
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// All records must share one scorer id and carry finite scores.
pub fn write_scores(path: impl AsRef<Path>, records: &[ScoreRecord]) -> Result<()> {
    validate_scores(records)?;
    write_atomically(path.as_ref(), |out| write_score_lines(out, records))
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(Error::io(path))?;
    let mut out: Vec<ScoreRecord> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(Error::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let parsed: Line = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if let Some(first) = out.first() {
            if first.scorer_id != parsed.scorer_id {
                return Err(malformed(format!(
                    "scorer id {:?} differs from {:?}",
                    parsed.scorer_id, first.scorer_id
                )));
            }
        }
        out.push(ScoreRecord {
            id: parsed.id.into_owned(),
            scorer_id: parsed.scorer_id.into_owned(),
            raw_score: parsed.score,
            percentile: parsed.percentile,
        });
    }
    Ok(out)
}
