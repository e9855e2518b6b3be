use super::eval::EpisodeRecord;
use crate::sim::Outcome;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvBreakdown {
    pub episodes: usize,
    pub successes: usize,
    pub collisions: usize,
    pub timeouts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: usize,
    pub successes: usize,
    pub collisions: usize,
    pub timeouts: usize,
    pub success_rate: f64,
    /// Mean duration of unsuccessful episodes, seconds.
    pub mean_survival_time: Option<f64>,
    /// Mean duration of successful episodes, seconds.
    pub mean_traversal_time: Option<f64>,
    /// Mean discounted collision-cost return.
    pub mean_cost_return: f64,
    pub per_env: BTreeMap<String, EnvBreakdown>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl Metrics {
    pub fn from_records(records: &[EpisodeRecord]) -> Self {
        let mut per_env: BTreeMap<String, EnvBreakdown> = BTreeMap::new();
        let (mut survival, mut traversal, mut costs) = (Vec::new(), Vec::new(), Vec::new());
        let (mut s, mut c, mut t) = (0, 0, 0);
        for r in records {
            let e = per_env.entry(r.env_id.clone()).or_default();
            e.episodes += 1;
            match r.outcome {
                Outcome::Success => {
                    s += 1;
                    e.successes += 1;
                    traversal.push(r.sim_time);
                }
                Outcome::Collision => {
                    c += 1;
                    e.collisions += 1;
                    survival.push(r.sim_time);
                }
                Outcome::Timeout | Outcome::Running => {
                    t += 1;
                    e.timeouts += 1;
                    survival.push(r.sim_time);
                }
            }
            costs.push(r.cost_return);
        }
        let n = records.len();
        Self {
            episodes: n,
            successes: s,
            collisions: c,
            timeouts: t,
            success_rate: if n == 0 { 0.0 } else { s as f64 / n as f64 },
            mean_survival_time: mean(&survival),
            mean_traversal_time: mean(&traversal),
            mean_cost_return: mean(&costs).unwrap_or(0.0),
            per_env,
        }
    }
}
