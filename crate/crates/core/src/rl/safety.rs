use serde::{Deserialize, Serialize};

/// Fixed Lagrangian penalty on the collision cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyConfig {
    pub enabled: bool,
    pub lambda: f64,
    /// Cost-return threshold; reported against, never optimized.
    pub epsilon: f64,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            lambda: 0.0,
            epsilon: 0.0,
        }
    }
}

impl SafetyConfig {
    pub const LAMBDA_GRID: [f64; 4] = [1.0, 5.0, 10.0, 20.0];

    pub fn lagrangian(lambda: f64) -> Self {
        Self {
            enabled: true,
            lambda,
            epsilon: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.lambda >= 0.0) {
            return Err(format!("lambda must be non-negative, got {}", self.lambda));
        }
        Ok(())
    }

    pub fn effective_lambda(&self) -> f64 {
        if self.enabled {
            self.lambda
        } else {
            0.0
        }
    }
}

/// `reward − λ·cost`, or `reward` when shaping is disabled.
pub fn shaped_reward(reward: f64, cost: f64, safety: &SafetyConfig) -> f64 {
    if safety.enabled {
        reward - safety.lambda * cost
    } else {
        reward
    }
}

/// `Σ_t γ^t · cost_t`.
pub fn episode_cost_return(costs: &[f64], gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut g = 1.0;
    for &c in costs {
        total += g * c;
        g *= gamma;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shaping_examples() {
        let s = SafetyConfig::lagrangian(10.0);
        assert_eq!(shaped_reward(-4.0, 1.0, &s), -14.0);
        assert_eq!(shaped_reward(1.5, 0.0, &s), 1.5);
        assert_eq!(shaped_reward(-4.0, 1.0, &SafetyConfig::default()), -4.0);
        assert!(SafetyConfig::lagrangian(-1.0).validate().is_err());
    }

    #[test]
    fn cost_return_examples() {
        assert_eq!(episode_cost_return(&[0.0; 30], 0.99), 0.0);
        let mut costs = vec![0.0; 12];
        costs[7] = 1.0;
        assert!((episode_cost_return(&costs, 0.99) - 0.99f64.powi(7)).abs() < 1e-15);
    }
}
