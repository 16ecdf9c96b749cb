//! Instruments for comparing samplers.

mod correlation;
mod epochs;
mod histogram;
mod kendall;
mod overscaling;

pub use correlation::{correlation_matrix, CorrelationMatrix};
pub use epochs::{epoch_plan, EpochPlan};
pub use histogram::{score_histogram, Histogram};
pub use kendall::{kendall_tau_b, kendall_tau_scores};
pub use overscaling::{over_scaling, MetricTriple, OverScaling};
