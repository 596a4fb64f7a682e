//! Monte-Carlo campaigns and the statistics they rest on.

pub mod campaign;
pub mod elln;
pub mod entropy;
pub mod fit;
pub mod ks;
pub mod stats;
pub mod verdict;

pub use fit::{spearman, ScalingFit};
pub use ks::{ks_normal, ks_one_sample, ks_two_sample, KsResult};
pub use stats::{covariance_estimate, jackknife, mean_estimate, variance_estimate, Estimate};
pub use verdict::{verdicts_from_json, verdicts_to_json, Verdict};
