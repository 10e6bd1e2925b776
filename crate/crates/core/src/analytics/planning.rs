use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkerStats {
    pub worker_id: String,
    /// In [0, 1].
    pub acceptance_rate: f64,
    /// Mean reviewed story quality on a 1–5 scale.
    pub avg_quality: f64,
    pub accepted: u64,
    /// Stories written in the current batch.
    pub stories_written: u64,
}

impl WorkerStats {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.acceptance_rate) {
            return Err(Error::Data(format!(
                "worker {}: acceptance rate {} outside [0, 1]",
                self.worker_id, self.acceptance_rate
            )));
        }
        if !(1.0..=5.0).contains(&self.avg_quality) {
            return Err(Error::Data(format!(
                "worker {}: quality {} outside [1, 5]",
                self.worker_id, self.avg_quality
            )));
        }
        Ok(())
    }
}

pub const MIN_ACCEPTANCE: f64 = 0.90;
pub const MIN_QUALITY: f64 = 3.1;
pub const MIN_ACCEPTED: u64 = 5;

/// Acceptance ≥ 90 %, quality strictly above 3.1, at least 5 accepted.
pub fn qualify(stats: &WorkerStats) -> bool {
    stats.acceptance_rate >= MIN_ACCEPTANCE
        && stats.avg_quality > MIN_QUALITY
        && stats.accepted >= MIN_ACCEPTED
}

/// The bare review-size rule: 10 below ten stories, else ⌈10·log₁₀ n_w⌉.
pub fn review_rule(n_w: u64) -> u64 {
    if n_w < 10 {
        10
    } else {
        // tolerance keeps exact powers of ten from rounding up
        (10.0 * (n_w as f64).log10() - 1e-9).ceil() as u64
    }
}

/// Stories to review from a worker who wrote `n_w` this batch:
/// [`review_rule`], never more than `n_w`.
pub fn plan_review_sample(n_w: u64) -> u64 {
    review_rule(n_w).min(n_w)
}
