//! Core algorithms for score-driven training-data curation.
//!
//! The crate is `no_std` and only needs `alloc`. It holds everything that is
//! pure computation:
//!
//! * [`lsh`]: seeded p-stable and signed-projection hash families together with
//!   the closed-form kernels their collision probabilities realize.
//! * [`sketch`]: the `R x B` counter matrix used to estimate kernel sums in two
//!   linear passes, mergeable across shards.
//! * [`sampling`]: top/bottom-K and weighted (inverse-)propensity selection.
//! * [`scoring`] and [`prompt`]: quality-score conventions for LLM-based
//!   scorers, plus a deterministic mock model.
//! * [`analysis`]: rank correlation, histograms, over-scaling and iso-compute
//!   epoch accounting.
//!
//! IO, file formats, the HTTP client and the command line live in the `curata`
//! crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
mod error;
pub mod lsh;
pub mod prompt;
pub mod record;
pub mod rng;
pub mod sampling;
pub mod scoring;
pub mod sketch;

pub use error::{Error, Result};
pub use lsh::{HashFamily, HashFamilySpec, HashKind};
pub use record::{EmbeddingRecord, ExampleRecord, ScoreRecord};
pub use sampling::{Direction, PolicyKind, SelectionPolicy, SelectionResult};
pub use sketch::KdeSketch;
