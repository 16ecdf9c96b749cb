//! End-to-end scoring runs.

mod density;
mod llm;

pub use density::{
    density_score_all, estimate_bandwidth, BANDWIDTH_SAMPLE, DensityOutput, DensityRun, Kernel, PassCounters, PROGRESS_DIR,
};
pub use llm::{askllm_score_all, perplexity_score_all};
