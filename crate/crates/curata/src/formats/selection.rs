//! Selection outputs: an id list (one id per line, selection order) and a
//! JSON metadata sidecar.

use std::fs;
use std::io::Write;
use std::path::Path;

use curata_core::{PolicyKind, SelectionResult};
use serde::{Deserialize, Serialize};

use super::write_atomically;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMeta {
    pub policy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub k: usize,
    pub n: usize,
    pub scorer_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Weights>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub min: f64,
    pub max: f64,
    pub sum: f64,
}

pub fn policy_name(kind: PolicyKind) -> &'static str {
    match kind {
        PolicyKind::TopK => "top-k",
        PolicyKind::BottomK => "bottom-k",
        PolicyKind::InversePropensity | PolicyKind::Propensity => "ips",
        PolicyKind::UniformRandom => "uniform",
    }
}

impl SelectionMeta {
    pub fn describe(result: &SelectionResult, n: usize, scorer_id: &str) -> Self {
        let p = result.policy;
        let direction = match p.kind {
            PolicyKind::InversePropensity => Some("inverse".to_owned()),
            PolicyKind::Propensity => Some("direct".to_owned()),
            _ => None,
        };
        SelectionMeta {
            policy: policy_name(p.kind).to_owned(),
            direction,
            seed: p.is_stochastic().then_some(p.seed),
            k: p.k,
            n,
            scorer_id: scorer_id.to_owned(),
            weights: result.weights.map(|w| Weights {
                min: w.min,
                max: w.max,
                sum: w.sum,
            }),
        }
    }
}

/// Writes `<dir>/selection.ids` and `<dir>/selection.meta.json`.
pub fn write_selection(dir: impl AsRef<Path>, ids: &[String], meta: &SelectionMeta) -> Result<()> {
    let dir = dir.as_ref();
    write_atomically(&dir.join("selection.ids"), |out| {
        for id in ids {
            out.write_all(id.as_bytes())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    })?;
    write_atomically(&dir.join("selection.meta.json"), |out| {
        serde_json::to_writer_pretty(&mut *out, meta)?;
        out.write_all(b"\n")
    })
}

pub fn read_selection_ids(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    Ok(text.lines().map(str::to_owned).collect())
}

pub fn read_selection_meta(path: impl AsRef<Path>) -> Result<SelectionMeta> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}
