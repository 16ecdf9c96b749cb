//! IO, scoring clients, pipelines and the command line around `curata-core`.
//!
//! * [`manifest`] reads sharded corpora and embeddings described by a JSON
//!   manifest.
//! * [`formats`] holds the on-disk formats: embedding shards, score files,
//!   sketch files and selection outputs.
//! * [`client`] talks to an LLM inference service (or a deterministic mock);
//!   [`stub`] is a small in-process server implementing the same protocol.
//! * [`pipeline`] runs the scorers end to end.
//! * [`cli`] wires everything into the `curata` binary.

pub mod cli;
pub mod client;
mod error;
pub mod formats;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod stub;

pub use curata_core as core;
pub use error::{Error, Result};
pub use manifest::CorpusManifest;
