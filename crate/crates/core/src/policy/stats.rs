//! Streaming per-feature observation statistics (Welford) with a mergeable
//! representation for coordinator/worker aggregation.
//!
//! Policies never read the live statistics: normalization goes through a
//! [`NormSnapshot`] frozen at the start of each optimizer iteration, so every
//! rollout inside one iteration sees identical normalization.

use serde::{Deserialize, Serialize};

use crate::sim::OBS_FEATURES;

const EPS_NORM: f64 = 1e-8;

/// Running count / mean / second central moment per observation feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    count: u64,
    mean: [f64; OBS_FEATURES],
    m2: [f64; OBS_FEATURES],
    frozen: bool,
}

impl Default for RunningStats {
    fn default() -> Self {
        RunningStats {
            count: 0,
            mean: [0.0; OBS_FEATURES],
            m2: [0.0; OBS_FEATURES],
            frozen: false,
        }
    }
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Frozen statistics ignore further pushes and merges.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Welford update with one feature row.
    pub fn push(&mut self, row: &[f64; OBS_FEATURES]) {
        if self.frozen {
            return;
        }
        self.count += 1;
        let n = self.count as f64;
        for i in 0..OBS_FEATURES {
            let delta = row[i] - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (row[i] - self.mean[i]);
        }
    }

    /// Merges another accumulator (parallel Welford combine).
    pub fn merge(&mut self, other: &RunningStats) {
        if self.frozen || other.count == 0 {
            return;
        }
        if self.count == 0 {
            self.count = other.count;
            self.mean = other.mean;
            self.m2 = other.m2;
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        for i in 0..OBS_FEATURES {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * (nb / n);
            self.m2[i] += other.m2[i] + delta * delta * (na * nb / n);
        }
        self.count += other.count;
    }

    /// Population variance per feature.
    pub fn variance(&self) -> [f64; OBS_FEATURES] {
        let mut out = [0.0; OBS_FEATURES];
        if self.count > 0 {
            let n = self.count as f64;
            for i in 0..OBS_FEATURES {
                out[i] = (self.m2[i] / n).max(0.0);
            }
        }
        out
    }

    pub fn mean(&self) -> &[f64; OBS_FEATURES] {
        &self.mean
    }

    /// Snapshot used for normalization. With no data yet this is the
    /// identity transform (mean 0, var 1).
    pub fn snapshot(&self) -> NormSnapshot {
        if self.count == 0 {
            return NormSnapshot::identity();
        }
        let var = self.variance();
        let mut inv_std = [0.0; OBS_FEATURES];
        for i in 0..OBS_FEATURES {
            inv_std[i] = 1.0 / (var[i] + EPS_NORM).sqrt();
        }
        NormSnapshot {
            mean: self.mean,
            inv_std,
        }
    }
}

/// Frozen normalization transform: `(x - mean) * inv_std` per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSnapshot {
    pub mean: [f64; OBS_FEATURES],
    pub inv_std: [f64; OBS_FEATURES],
}

impl NormSnapshot {
    pub fn identity() -> Self {
        NormSnapshot {
            mean: [0.0; OBS_FEATURES],
            inv_std: [1.0; OBS_FEATURES],
        }
    }

    #[inline]
    pub fn normalize_feature(&self, index: usize, value: f64) -> f64 {
        (value - self.mean[index]) * self.inv_std[index]
    }
}
