//! Episode collection. Each worker owns a persistent stream of episodes whose
//! tasks and seeds are pure functions of the worker seed and episode counter.

use super::buffer::{Source, Transition};
use super::features::FeatureConfig;
use super::history::{HistoryWindow, Window, WindowLayout};
use super::model::{DynamicsModel, KnownReward};
use super::planning::{mpc_select_action, LearnedModel, MpcConfig};
use super::td3::ActorSnapshot;
use super::RlError;
use crate::envgen::EnvironmentSpec;
use crate::seed::{derive_seed, rng_from_seed};
use crate::sim::trace::EpisodeTrace;
use crate::sim::{Outcome, SimConfig, SimError, Simulator};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

/// Uniformly picks a member index of a non-empty set.
pub fn sample_task<T>(members: &[T], seed: u64) -> Result<usize, RlError> {
    if members.is_empty() {
        return Err(RlError::EmptySet);
    }
    Ok(rng_from_seed(seed).gen_range(0..members.len()))
}

/// Maps a history window to a normalized action.
pub trait UnitPolicy: Sync {
    fn act(&self, window: &Window, layout: &WindowLayout, rng: &mut ChaCha8Rng) -> Result<[f64; 2], RlError>;
}

/// Uniform random actions.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl UnitPolicy for RandomPolicy {
    fn act(&self, _: &Window, _: &WindowLayout, rng: &mut ChaCha8Rng) -> Result<[f64; 2], RlError> {
        Ok([rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)])
    }
}

/// Actor output plus clipped gaussian noise; zero noise is the greedy policy.
#[derive(Debug, Clone)]
pub struct NoisyActor {
    pub actor: ActorSnapshot,
    pub noise: f64,
}

impl UnitPolicy for NoisyActor {
    fn act(&self, window: &Window, layout: &WindowLayout, rng: &mut ChaCha8Rng) -> Result<[f64; 2], RlError> {
        let mut a = self.actor.act(&window.window(layout));
        if self.noise > 0.0 {
            for v in &mut a {
                let eps: f64 = rng.sample(StandardNormal);
                *v = (*v + self.noise * eps).clamp(-1.0, 1.0);
            }
        }
        Ok(a)
    }
}

/// Random-shooting MPC through a learned model.
#[derive(Debug, Clone)]
pub struct MpcPolicy {
    pub model: Arc<DynamicsModel>,
    pub reward: KnownReward,
    pub config: MpcConfig,
}

impl UnitPolicy for MpcPolicy {
    fn act(&self, window: &Window, layout: &WindowLayout, rng: &mut ChaCha8Rng) -> Result<[f64; 2], RlError> {
        let model = LearnedModel {
            model: &self.model,
            layout: *layout,
            reward: self.reward,
            sample: false,
        };
        Ok(mpc_select_action(&model, window, &self.config, rng)?.action)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RolloutConfig {
    pub sim: SimConfig,
    pub features: FeatureConfig,
    pub layout: WindowLayout,
    /// Attach simulator state to transitions (needed by oracle models).
    pub keep_sim_state: bool,
    pub record_traces: bool,
}

impl RolloutConfig {
    pub fn new(sim: SimConfig, features: FeatureConfig, history: usize) -> Self {
        Self {
            sim,
            features,
            layout: WindowLayout::new(history, features.width(), 2),
            keep_sim_state: false,
            record_traces: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub env_id: String,
    pub episode_seed: u64,
    pub outcome: Outcome,
    pub total_reward: f64,
    pub costs: Vec<f64>,
    pub steps: u32,
    pub sim_time: f64,
}

#[derive(Debug, Default)]
pub struct RolloutBatch {
    pub transitions: Vec<Transition>,
    pub episodes: Vec<EpisodeSummary>,
    pub traces: Vec<EpisodeTrace>,
    pub skipped: Vec<(String, String)>,
}

impl RolloutBatch {
    fn extend(&mut self, other: RolloutBatch) {
        self.transitions.extend(other.transitions);
        self.episodes.extend(other.episodes);
        self.traces.extend(other.traces);
        self.skipped.extend(other.skipped);
    }
}

#[derive(Debug)]
struct Active {
    env: usize,
    seed: u64,
    sim: Simulator,
    window: HistoryWindow,
    rng: ChaCha8Rng,
    trace: Option<EpisodeTrace>,
    total_reward: f64,
    costs: Vec<f64>,
}

/// A worker's endless episode stream over a fixed environment set.
#[derive(Debug)]
pub struct WorkerStream {
    seed: u64,
    episodes: u64,
    sims: Vec<Option<Simulator>>,
    active: Option<Active>,
}

impl WorkerStream {
    pub fn new(seed: u64, env_count: usize) -> Self {
        Self {
            seed,
            episodes: 0,
            sims: vec![None; env_count],
            active: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn episodes_started(&self) -> u64 {
        self.episodes
    }

    fn start(&mut self, envs: &[Arc<EnvironmentSpec>], cfg: &RolloutConfig, out: &mut RolloutBatch) -> Result<(), RlError> {
        let mut failures = 0usize;
        loop {
            let k = self.episodes;
            self.episodes += 1;
            let env = sample_task(envs, derive_seed(self.seed, "task", k))?;
            let seed = derive_seed(self.seed, "episode", k);
            let mut sim = match self.sims[env].take() {
                Some(s) => s,
                None => Simulator::new(&envs[env], cfg.sim)?,
            };
            match sim.reset(seed) {
                Ok(obs) => {
                    let mut window = HistoryWindow::new(cfg.layout);
                    window.reset(cfg.features.extract(&obs));
                    let trace = cfg
                        .record_traces
                        .then(|| EpisodeTrace::new(&envs[env], cfg.sim, seed, sim.pose()));
                    self.active = Some(Active {
                        env,
                        seed,
                        sim,
                        window,
                        rng: rng_from_seed(derive_seed(self.seed, "action", k)),
                        trace,
                        total_reward: 0.0,
                        costs: Vec::new(),
                    });
                    return Ok(());
                }
                Err(SimError::Layout(msg)) => {
                    log::warn!("skipping episode {k} of worker {:#x}: {msg}", self.seed);
                    out.skipped.push((envs[env].id.clone(), msg));
                    self.sims[env] = Some(sim);
                    failures += 1;
                    if failures > 100 * envs.len() {
                        return Err(RlError::EmptySet);
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Advances the stream by exactly `steps` environment steps.
    pub fn collect(
        &mut self,
        envs: &[Arc<EnvironmentSpec>],
        policy: &dyn UnitPolicy,
        cfg: &RolloutConfig,
        steps: usize,
    ) -> Result<RolloutBatch, RlError> {
        if envs.len() != self.sims.len() {
            return Err(RlError::Config("worker was created for a different environment set".into()));
        }
        let mut out = RolloutBatch::default();
        for _ in 0..steps {
            if self.active.is_none() {
                self.start(envs, cfg, &mut out)?;
            }
            let a = self.active.as_mut().expect("episode started");
            let obs = a.window.current().expect("window reset").clone();
            let u = policy.act(&obs, &cfg.layout, &mut a.rng)?;
            let sim_state = if cfg.keep_sim_state { a.sim.state() } else { None };
            let action = cfg.sim.action_bounds.from_unit(u);
            let r = a.sim.step(action)?;
            if let Some(tr) = a.trace.as_mut() {
                tr.record(action, a.sim.pose(), &r);
            }
            let next = a.window.push(cfg.features.extract(&r.observation), &u);
            a.total_reward += r.reward;
            a.costs.push(r.cost);
            out.transitions.push(Transition {
                obs,
                action: u,
                reward: r.reward,
                cost: r.cost,
                next_obs: next,
                done: matches!(r.outcome, Outcome::Collision | Outcome::Success),
                source: Source::Real,
                sim_state,
            });
            if r.outcome != Outcome::Running {
                let a = self.active.take().expect("episode active");
                out.episodes.push(EpisodeSummary {
                    env_id: envs[a.env].id.clone(),
                    episode_seed: a.seed,
                    outcome: r.outcome,
                    total_reward: a.total_reward,
                    costs: a.costs,
                    steps: a.sim.steps(),
                    sim_time: a.sim.sim_time(),
                });
                out.traces.extend(a.trace);
                self.sims[a.env] = Some(a.sim);
            }
        }
        Ok(out)
    }
}

/// Seeds of `n` workers derived from a run seed.
pub fn worker_streams(seed: u64, workers: usize, env_count: usize) -> Vec<WorkerStream> {
    (0..workers.max(1))
        .map(|i| WorkerStream::new(derive_seed(seed, "worker", i as u64), env_count))
        .collect()
}

/// Collects `steps` transitions split evenly over the workers. Output order is
/// by worker index, so results depend only on the worker count, not on scheduling.
pub fn collect(
    workers: &mut [WorkerStream],
    envs: &[Arc<EnvironmentSpec>],
    policy: &dyn UnitPolicy,
    cfg: &RolloutConfig,
    steps: usize,
) -> Result<RolloutBatch, RlError> {
    let n = workers.len();
    if n == 0 {
        return Err(RlError::Config("at least one rollout worker is required".into()));
    }
    let share = |i: usize| steps / n + usize::from(i < steps % n);
    if n == 1 {
        return workers[0].collect(envs, policy, cfg, steps);
    }
    let (tx, rx) = crossbeam_channel::unbounded();
    std::thread::scope(|scope| {
        for (i, w) in workers.iter_mut().enumerate() {
            let tx = tx.clone();
            scope.spawn(move || {
                let r = w.collect(envs, policy, cfg, share(i));
                tx.send((i, r)).expect("collector outlives workers");
            });
        }
    });
    drop(tx);
    let mut parts: Vec<(usize, Result<RolloutBatch, RlError>)> = rx.iter().collect();
    parts.sort_by_key(|(i, _)| *i);
    let mut out = RolloutBatch::default();
    for (_, part) in parts {
        out.extend(part?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::compute_reward;
    use crate::sim::trace::replay;

    fn envs() -> Vec<Arc<EnvironmentSpec>> {
        vec![Arc::new(EnvironmentSpec::empty_field("empty"))]
    }

    fn cfg(history: usize) -> RolloutConfig {
        RolloutConfig::new(SimConfig::default(), FeatureConfig::default(), history)
    }

    #[test]
    fn singleton_set_and_empty_set() {
        assert_eq!(sample_task(&["a"], 9).unwrap(), 0);
        assert!(matches!(sample_task::<u8>(&[], 9), Err(RlError::EmptySet)));
        assert_eq!(sample_task(&[0; 50], 3).unwrap(), sample_task(&[0; 50], 3).unwrap());
    }

    #[test]
    fn streams_are_reproducible() {
        let e = envs();
        let c = cfg(4);
        let mut a = WorkerStream::new(5, 1);
        let mut b = WorkerStream::new(5, 1);
        let ta = a.collect(&e, &RandomPolicy, &c, 300).unwrap();
        let tb = b.collect(&e, &RandomPolicy, &c, 300).unwrap();
        assert_eq!(ta.transitions.len(), 300);
        for (x, y) in ta.transitions.iter().zip(&tb.transitions) {
            assert!(x.same_content(y, &c.layout));
        }
        assert_eq!(ta.episodes, tb.episodes);
    }

    #[test]
    fn first_transition_window_is_padded() {
        let e = envs();
        let c = cfg(4);
        let mut w = WorkerStream::new(1, 1);
        let t = w.collect(&e, &RandomPolicy, &c, 1).unwrap();
        assert_eq!(t.transitions[0].obs.depth(4), 1);
        assert_eq!(t.transitions[0].next_obs.depth(4), 2);
        let flat = t.transitions[0].obs_window(&c.layout);
        assert!(flat[..3 * c.layout.frame_width()].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rewards_match_trace_replay() {
        let e = envs();
        let mut c = cfg(1);
        c.record_traces = true;
        let mut w = WorkerStream::new(7, 1);
        let batch = w.collect(&e, &RandomPolicy, &c, 1_200).unwrap();
        assert!(!batch.traces.is_empty());
        let mut offset = 0;
        for tr in &batch.traces {
            assert_eq!(replay(tr).unwrap(), tr.steps.len());
            let mut d_prev = c.features.goal_distance(batch.transitions[offset].obs.features(&c.layout));
            for (k, s) in tr.steps.iter().enumerate() {
                let t = &batch.transitions[offset + k];
                assert_eq!(t.reward, s.reward);
                let d = c.features.goal_distance(t.next_obs.features(&c.layout));
                let collision = s.outcome == Outcome::Collision;
                let r = compute_reward(&c.sim.reward, d_prev, d, collision, s.outcome == Outcome::Success);
                assert!((r - s.reward).abs() < 1e-9);
                d_prev = d;
            }
            offset += tr.steps.len();
        }
    }

    #[test]
    fn parallel_collection_depends_only_on_worker_count() {
        let e = envs();
        let c = cfg(2);
        let run = || {
            let mut ws = worker_streams(11, 3, 1);
            let a = collect(&mut ws, &e, &RandomPolicy, &c, 100).unwrap();
            let b = collect(&mut ws, &e, &RandomPolicy, &c, 50).unwrap();
            (a, b)
        };
        let (a1, b1) = run();
        let (a2, b2) = run();
        assert_eq!(a1.transitions.len(), 100);
        assert_eq!(b1.transitions.len(), 50);
        for (x, y) in a1.transitions.iter().chain(&b1.transitions).zip(a2.transitions.iter().chain(&b2.transitions)) {
            assert!(x.same_content(y, &c.layout));
        }
    }
}
