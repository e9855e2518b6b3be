use super::controller::{Controller, ControllerFactory};
use super::metrics::Metrics;
use super::BenchError;
use crate::envgen::{EnvKind, EnvironmentSpec};
use crate::rl::episode_cost_return;
use crate::seed::derive_seed;
use crate::sim::trace::EpisodeTrace;
use crate::sim::{Outcome, SimConfig, Simulator};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Episode counts and seeding for an evaluation pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalPlan {
    /// Static worlds are deterministic, so one episode each suffices.
    pub static_episodes: u32,
    pub dynamic_episodes: u32,
    pub seed: u64,
    /// Discount of the reported collision-cost return.
    pub gamma: f64,
}

impl Default for EvalPlan {
    fn default() -> Self {
        Self {
            static_episodes: 1,
            dynamic_episodes: 3,
            seed: 0,
            gamma: 0.99,
        }
    }
}

impl EvalPlan {
    pub fn episodes_for(&self, kind: EnvKind) -> u32 {
        match kind {
            EnvKind::Static => self.static_episodes,
            EnvKind::DynamicBox | EnvKind::DynamicWall => self.dynamic_episodes,
        }
    }

    pub fn episode_seed(&self, env_id: &str, episode: u32) -> u64 {
        derive_seed(self.seed, env_id, u64::from(episode))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub env_id: String,
    pub episode_seed: u64,
    pub outcome: Outcome,
    pub sim_time: f64,
    pub steps: u32,
    pub total_reward: f64,
    pub cost_return: f64,
}

/// Runs one episode to termination.
pub fn run_episode(
    env: &EnvironmentSpec,
    controller: &mut dyn Controller,
    sim: &SimConfig,
    episode_seed: u64,
    gamma: f64,
    record_trace: bool,
) -> Result<(EpisodeRecord, Option<EpisodeTrace>), BenchError> {
    let mut s = Simulator::new(env, *sim)?;
    let mut obs = s.reset(episode_seed)?;
    let mut trace = record_trace.then(|| EpisodeTrace::new(env, *sim, episode_seed, s.pose()));
    controller.reset(episode_seed);
    let mut costs = Vec::new();
    let mut total = 0.0;
    loop {
        let a = controller.act(&obs)?;
        let r = s.step(a)?;
        if let Some(t) = trace.as_mut() {
            t.record(a, s.pose(), &r);
        }
        total += r.reward;
        costs.push(r.cost);
        if r.outcome != Outcome::Running {
            let rec = EpisodeRecord {
                env_id: env.id.clone(),
                episode_seed,
                outcome: r.outcome,
                sim_time: r.sim_time,
                steps: s.steps(),
                total_reward: total,
                cost_return: episode_cost_return(&costs, gamma),
            };
            return Ok((rec, trace));
        }
        obs = r.observation;
    }
}

/// Deterministic evaluation of a controller over environments, parallel across
/// environments; records come back in environment order.
pub fn evaluate(
    envs: &[&EnvironmentSpec],
    factory: &dyn ControllerFactory,
    plan: &EvalPlan,
    sim: &SimConfig,
) -> Result<(Metrics, Vec<EpisodeRecord>), BenchError> {
    let per_env: Vec<Result<Vec<EpisodeRecord>, BenchError>> = envs
        .par_iter()
        .map(|env| {
            let mut c = factory.build(sim);
            (0..plan.episodes_for(env.kind()))
                .map(|k| {
                    let seed = plan.episode_seed(&env.id, k);
                    run_episode(env, c.as_mut(), sim, seed, plan.gamma, false).map(|(r, _)| r)
                })
                .collect()
        })
        .collect();
    let mut records = Vec::new();
    for r in per_env {
        records.extend(r?);
    }
    Ok((Metrics::from_records(&records), records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::ConstantController;
    use crate::sim::Action;

    #[test]
    fn straight_driver_in_empty_field() {
        let env = EnvironmentSpec::empty_field("empty");
        let sim = SimConfig::default();
        let (m, recs) = evaluate(&[&env], &ConstantController(Action::new(2.0, 0.0)), &EvalPlan::default(), &sim).unwrap();
        assert_eq!(m.success_rate, 1.0);
        // Success fires once within the goal radius: (10 − 0.4) / 2 m/s, rounded
        // up to the substep grid.
        let t = m.mean_traversal_time.unwrap();
        assert!((t - 9.6 / 2.0).abs() <= sim.substep_dt() + 1e-9, "{t}");
        assert_eq!(recs[0].cost_return, 0.0);
        assert_eq!(m.mean_survival_time, None);
    }

    #[test]
    fn standing_still_times_out_at_80_seconds() {
        let env = EnvironmentSpec::empty_field("empty");
        let (m, _) = evaluate(
            &[&env],
            &ConstantController(Action::new(0.0, 0.0)),
            &EvalPlan::default(),
            &SimConfig::default(),
        )
        .unwrap();
        assert_eq!(m.timeouts, 1);
        assert_eq!(m.mean_survival_time, Some(80.0));
        assert_eq!(m.mean_traversal_time, None);
    }

    #[test]
    fn turning_into_wall_collides() {
        let env = EnvironmentSpec::empty_field("empty");
        let (m, recs) = evaluate(
            &[&env],
            &ConstantController(Action::new(2.0, 1.5)),
            &EvalPlan::default(),
            &SimConfig::default(),
        )
        .unwrap();
        assert_eq!(m.collisions, 1);
        assert_eq!(m.success_rate, 0.0);
        assert_eq!(m.mean_traversal_time, None);
        let k = recs[0].steps as i32 - 1;
        assert!((recs[0].cost_return - 0.99f64.powi(k)).abs() < 1e-12);
    }
}
