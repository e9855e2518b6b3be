//! Observation features: min-pooled LiDAR bins followed by the relative goal.

use crate::sim::Observation;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Number of min-pooled LiDAR bins; equal to the beam count disables pooling.
    pub lidar_bins: usize,
    pub max_range: f64,
    /// Divisor applied to the goal vector at the network input.
    pub goal_scale: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            lidar_bins: 72,
            max_range: 5.0,
            goal_scale: 10.0,
        }
    }
}

impl FeatureConfig {
    pub fn width(&self) -> usize {
        self.lidar_bins + 2
    }

    /// Raw features in meters: `[bins…, goal_x, goal_y]`.
    pub fn extract(&self, obs: &Observation) -> Vec<f64> {
        let mut f = pool_lidar(&obs.lidar, self.lidar_bins);
        f.extend_from_slice(&obs.goal_rel);
        f
    }

    /// Per-feature multipliers bringing features to roughly unit scale.
    pub fn scale(&self) -> Vec<f64> {
        let mut s = vec![1.0 / self.max_range; self.lidar_bins];
        s.extend_from_slice(&[1.0 / self.goal_scale; 2]);
        s
    }

    pub fn goal(&self, features: &[f64]) -> [f64; 2] {
        [features[self.lidar_bins], features[self.lidar_bins + 1]]
    }

    pub fn goal_distance(&self, features: &[f64]) -> f64 {
        let [x, y] = self.goal(features);
        x.hypot(y)
    }

    pub fn min_range(&self, features: &[f64]) -> f64 {
        features[..self.lidar_bins].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Splits the scan into `bins` contiguous groups and keeps each group's minimum.
pub fn pool_lidar(lidar: &[f64], bins: usize) -> Vec<f64> {
    let n = lidar.len();
    assert!(bins >= 1 && bins <= n, "bins must be in 1..={n}");
    (0..bins)
        .map(|b| {
            let lo = b * n / bins;
            let hi = (b + 1) * n / bins;
            lidar[lo..hi].iter().copied().fold(f64::INFINITY, f64::min)
        })
        .collect()
}
