//! The training loop shared by all techniques.

use super::buffer::ReplayBuffer;
use super::features::FeatureConfig;
use super::history::WindowLayout;
use super::model::{DynamicsConfig, DynamicsModel, KnownReward};
use super::planning::{dyna_augment, LearnedModel, MpcConfig};
use super::rollout::{
    collect, worker_streams, EpisodeSummary, MpcPolicy, NoisyActor, RandomPolicy, RolloutConfig, UnitPolicy,
    WorkerStream,
};
use super::safety::SafetyConfig;
use super::td3::{actor_from_checkpoint, ActorSnapshot, Td3Agent, Td3Config};
use super::RlError;
use crate::envgen::EnvironmentSpec;
use crate::nn::Checkpoint;
use crate::seed::{derive_seed, rng_from_seed};
use crate::sim::SimConfig;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    Baseline,
    Lagrangian,
    Dyna,
    Mpc,
}

impl Technique {
    pub const ALL: [Technique; 4] = [Technique::Baseline, Technique::Lagrangian, Technique::Dyna, Technique::Mpc];

    pub fn as_str(self) -> &'static str {
        match self {
            Technique::Baseline => "baseline",
            Technique::Lagrangian => "lagrangian",
            Technique::Dyna => "dyna",
            Technique::Mpc => "mpc",
        }
    }

    pub fn uses_model(self) -> bool {
        matches!(self, Technique::Dyna | Technique::Mpc)
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Technique {
    type Err = RlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Technique::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| RlError::Config(format!("unknown technique `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub technique: Technique,
    pub history: usize,
    pub total_steps: u64,
    /// Environment-step counts at which the policy is handed to the checkpoint hook.
    pub checkpoints: Vec<u64>,
    pub workers: usize,
    /// Environment steps collected between update phases.
    pub round_steps: usize,
    pub buffer_capacity: usize,
    /// Synthetic transitions per real one (Dyna).
    pub dyna_k: usize,
    pub td3: Td3Config,
    pub safety: SafetyConfig,
    pub dynamics: DynamicsConfig,
    pub mpc: MpcConfig,
    pub features: FeatureConfig,
    pub sim: SimConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            technique: Technique::Baseline,
            history: 1,
            total_steps: 200_000,
            checkpoints: Vec::new(),
            workers: 1,
            round_steps: 1_000,
            buffer_capacity: 300_000,
            dyna_k: 1,
            td3: Td3Config::default(),
            safety: SafetyConfig::default(),
            dynamics: DynamicsConfig::default(),
            mpc: MpcConfig::default(),
            features: FeatureConfig::default(),
            sim: SimConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: String| Err(RlError::Config(m));
        if ![1, 4, 8].contains(&self.history) {
            return bad(format!("history must be 1, 4 or 8, got {}", self.history));
        }
        if self.total_steps == 0 || self.round_steps == 0 || self.workers == 0 || self.buffer_capacity == 0 {
            return bad("total_steps, round_steps, workers and buffer_capacity must be positive".into());
        }
        if let Some(&c) = self.checkpoints.iter().find(|&&c| c == 0 || c > self.total_steps) {
            return bad(format!("checkpoint {c} lies outside 1..={}", self.total_steps));
        }
        if self.technique.uses_model() && self.dynamics.retrain_every == 0 {
            return bad("dynamics.retrain_every must be positive".into());
        }
        let nbins = self.features.lidar_bins;
        if nbins == 0 || nbins > self.sim.lidar.beams {
            return bad(format!("lidar_bins must lie in 1..={}", self.sim.lidar.beams));
        }
        self.td3.validate().map_err(RlError::Config)?;
        self.safety.validate().map_err(RlError::Config)?;
        self.sim.validate()?;
        Ok(())
    }

    pub fn layout(&self) -> WindowLayout {
        WindowLayout::new(self.history, self.features.width(), 2)
    }

    /// Penalty weight on the collision cost during updates.
    pub fn lambda(&self) -> f64 {
        match self.technique {
            Technique::Lagrangian => self.safety.lambda,
            _ => self.safety.effective_lambda(),
        }
    }

    pub fn known_reward(&self) -> KnownReward {
        KnownReward::new(self.features, &self.sim)
    }

    fn checkpoint_list(&self) -> Vec<u64> {
        let mut c = self.checkpoints.clone();
        c.push(self.total_steps);
        c.sort_unstable();
        c.dedup();
        c
    }
}

#[derive(Debug, Clone)]
pub enum PolicyKind {
    Actor(ActorSnapshot),
    Mpc(MpcPolicy),
}

/// A trained controller over history windows.
#[derive(Debug, Clone)]
pub struct TrainedPolicy {
    pub technique: Technique,
    pub layout: WindowLayout,
    pub features: FeatureConfig,
    pub kind: PolicyKind,
}

impl TrainedPolicy {
    /// The deterministic evaluation policy.
    pub fn greedy(&self) -> Box<dyn UnitPolicy + Send> {
        match &self.kind {
            PolicyKind::Actor(a) => Box::new(NoisyActor {
                actor: a.clone(),
                noise: 0.0,
            }),
            PolicyKind::Mpc(m) => Box::new(m.clone()),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = match &self.kind {
            PolicyKind::Actor(a) => Checkpoint::new()
                .with_network("actor", &a.actor)
                .with_vector("input_scale", &a.input_scale),
            PolicyKind::Mpc(m) => {
                let mut ck = m.model.to_checkpoint();
                ck.meta.insert("mpc".into(), serde_json::to_value(m.config).expect("serializable"));
                ck.meta.insert("reward".into(), serde_json::to_value(m.reward.coefficients).expect("serializable"));
                ck.meta.insert(
                    "radii".into(),
                    serde_json::json!([m.reward.robot_radius, m.reward.goal_radius]),
                );
                ck
            }
        };
        ck.meta.insert("technique".into(), serde_json::to_value(self.technique).expect("serializable"));
        ck.meta.insert("history".into(), serde_json::json!(self.layout.history));
        ck.meta.insert("features".into(), serde_json::to_value(self.features).expect("serializable"));
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, RlError> {
        fn meta<T: serde::de::DeserializeOwned>(ck: &Checkpoint, key: &str) -> Result<T, RlError> {
            let v = ck
                .meta
                .get(key)
                .ok_or_else(|| RlError::Config(format!("checkpoint has no `{key}` entry")))?;
            serde_json::from_value(v.clone()).map_err(|e| RlError::Config(format!("checkpoint `{key}`: {e}")))
        }
        let technique: Technique = meta(ck, "technique")?;
        let history: usize = meta(ck, "history")?;
        let features: FeatureConfig = meta(ck, "features")?;
        if history == 0 {
            return Err(RlError::Config("checkpoint history must be positive".into()));
        }
        let layout = WindowLayout::new(history, features.width(), 2);
        let kind = if technique == Technique::Mpc {
            let model = DynamicsModel::from_checkpoint(ck, DynamicsConfig::default())?;
            if model.input_dim() != layout.width() + 2 || model.output_dim() != layout.obs_width {
                return Err(RlError::Config("dynamics model does not match the window layout".into()));
            }
            let radii: [f64; 2] = meta(ck, "radii")?;
            PolicyKind::Mpc(MpcPolicy {
                model: Arc::new(model),
                reward: KnownReward {
                    features,
                    coefficients: meta(ck, "reward")?,
                    robot_radius: radii[0],
                    goal_radius: radii[1],
                },
                config: meta(ck, "mpc")?,
            })
        } else {
            let a = actor_from_checkpoint(ck)?;
            if a.input_scale.len() != layout.width() {
                return Err(RlError::Config("actor does not match the window layout".into()));
            }
            PolicyKind::Actor(a)
        };
        Ok(Self {
            technique,
            layout,
            features,
            kind,
        })
    }
}

#[derive(Debug)]
pub struct Trainer {
    config: TrainConfig,
    layout: WindowLayout,
    rollout: RolloutConfig,
    envs: Vec<Arc<EnvironmentSpec>>,
    agent: Option<Td3Agent>,
    model: Option<DynamicsModel>,
    buffer: ReplayBuffer,
    workers: Vec<WorkerStream>,
    rng: ChaCha8Rng,
    steps: u64,
    next_retrain: u64,
    episodes: Vec<EpisodeSummary>,
}

impl Trainer {
    pub fn new(config: TrainConfig, envs: Vec<Arc<EnvironmentSpec>>, seed: u64) -> Result<Self, RlError> {
        config.validate()?;
        if envs.is_empty() {
            return Err(RlError::EmptySet);
        }
        let layout = config.layout();
        let rollout = RolloutConfig::new(config.sim, config.features, config.history);
        let agent = match config.technique {
            Technique::Mpc => None,
            _ => Some(Td3Agent::new(
                layout.scale(&config.features.scale()),
                config.td3.clone(),
                derive_seed(seed, "agent", 0),
            )?),
        };
        let model = if config.technique.uses_model() {
            Some(DynamicsModel::for_layout(&layout, config.dynamics.clone(), derive_seed(seed, "dynamics", 0))?)
        } else {
            None
        };
        Ok(Self {
            buffer: ReplayBuffer::new(config.buffer_capacity),
            workers: worker_streams(derive_seed(seed, "rollout", 0), config.workers, envs.len()),
            rng: rng_from_seed(derive_seed(seed, "updates", 0)),
            next_retrain: config.dynamics.retrain_every,
            steps: 0,
            episodes: Vec::new(),
            agent,
            model,
            layout,
            rollout,
            envs,
            config,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn agent(&self) -> Option<&Td3Agent> {
        self.agent.as_ref()
    }

    pub fn model(&self) -> Option<&DynamicsModel> {
        self.model.as_ref()
    }

    /// Training episodes completed so far.
    pub fn episodes(&self) -> &[EpisodeSummary] {
        &self.episodes
    }

    fn model_ready(&self) -> bool {
        self.steps >= self.config.dynamics.retrain_every
    }

    pub fn policy(&self) -> TrainedPolicy {
        let kind = match (&self.agent, &self.model) {
            (Some(a), _) => PolicyKind::Actor(a.snapshot()),
            (None, Some(m)) => PolicyKind::Mpc(MpcPolicy {
                model: Arc::new(m.clone()),
                reward: self.config.known_reward(),
                config: self.config.mpc,
            }),
            (None, None) => unreachable!("a trainer always owns an agent or a model"),
        };
        TrainedPolicy {
            technique: self.config.technique,
            layout: self.layout,
            features: self.config.features,
            kind,
        }
    }

    fn behavior(&self) -> Box<dyn UnitPolicy + Send> {
        let warm = self.steps < self.config.td3.warmup_steps;
        match (&self.agent, &self.model) {
            (Some(_), _) if warm => Box::new(RandomPolicy),
            (Some(a), _) => Box::new(NoisyActor {
                actor: a.snapshot(),
                noise: self.config.td3.exploration_noise,
            }),
            (None, Some(_)) if warm || !self.model_ready() => Box::new(RandomPolicy),
            (None, Some(_)) => self.policy().greedy(),
            (None, None) => unreachable!("a trainer always owns an agent or a model"),
        }
    }

    /// Collects one round of experience (never crossing `limit`) and runs the
    /// matching updates. Returns the number of environment steps taken.
    pub fn round(&mut self, limit: u64) -> Result<usize, RlError> {
        let mut n = (limit.saturating_sub(self.steps)).min(self.config.round_steps as u64);
        if self.model.is_some() {
            n = n.min(self.next_retrain - self.steps);
        }
        let n = n as usize;
        if n == 0 {
            return Ok(0);
        }
        let policy = self.behavior();
        let batch = collect(&mut self.workers, &self.envs, policy.as_ref(), &self.rollout, n)?;
        for t in batch.transitions {
            self.buffer.push(t);
        }
        self.episodes.extend(batch.episodes);
        self.steps += n as u64;

        if let Some(model) = self.model.as_mut() {
            if self.steps >= self.next_retrain {
                let loss = model.train_from_buffer(&self.buffer, &self.layout, &mut self.rng)?;
                log::info!("dynamics model retrained at {} steps, loss {loss:.4}", self.steps);
                self.next_retrain += self.config.dynamics.retrain_every;
            }
        }
        if self.config.technique == Technique::Dyna && self.model_ready() {
            let model = self.model.as_ref().expect("dyna owns a model");
            let learned = LearnedModel {
                model,
                layout: self.layout,
                reward: self.config.known_reward(),
                sample: model.is_probabilistic(),
            };
            dyna_augment(&mut self.buffer, &learned, self.config.dyna_k, n, &mut self.rng)?;
        }
        if let Some(agent) = self.agent.as_mut() {
            if self.steps >= self.config.td3.warmup_steps {
                let lambda = self.config.lambda();
                let updates = n * self.config.td3.updates_per_step as usize;
                for _ in 0..updates {
                    let batch = self.buffer.sample(self.config.td3.batch_size, &mut self.rng)?;
                    agent.update(&batch, &self.layout, lambda)?;
                }
            }
        }
        Ok(n)
    }

    /// Trains to `total_steps`, calling `on_checkpoint` at each configured count.
    pub fn train<F>(&mut self, mut on_checkpoint: F) -> Result<(), RlError>
    where
        F: FnMut(&Trainer, u64) -> Result<(), RlError>,
    {
        for c in self.config.checkpoint_list() {
            if c <= self.steps {
                continue;
            }
            while self.steps < c {
                self.round(c)?;
            }
            log::info!(
                "{} steps, {} episodes, buffer {}",
                self.steps,
                self.episodes.len(),
                self.buffer.len()
            );
            on_checkpoint(self, c)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::buffer::Source;

    fn tiny(technique: Technique) -> TrainConfig {
        TrainConfig {
            technique,
            total_steps: 600,
            checkpoints: vec![300],
            round_steps: 100,
            td3: Td3Config {
                hidden: vec![16],
                batch_size: 16,
                warmup_steps: 200,
                ..Td3Config::default()
            },
            dynamics: DynamicsConfig {
                hidden: vec![16],
                train_steps: 20,
                retrain_every: 200,
                batch_size: 32,
                norm_samples: 100,
                ..DynamicsConfig::default()
            },
            mpc: MpcConfig {
                samples: 8,
                horizon: 2,
                gamma: 0.99,
            },
            features: FeatureConfig {
                lidar_bins: 8,
                ..FeatureConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    fn envs() -> Vec<Arc<EnvironmentSpec>> {
        vec![Arc::new(EnvironmentSpec::empty_field("empty"))]
    }

    #[test]
    fn checkpoints_fire_in_order() {
        let mut t = Trainer::new(tiny(Technique::Baseline), envs(), 0).unwrap();
        let mut seen = Vec::new();
        t.train(|tr, c| {
            assert_eq!(tr.steps(), c);
            seen.push(c);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![300, 600]);
        assert_eq!(t.buffer().count(Source::Model), 0);
        assert!(t.agent().unwrap().updates() > 0);
    }

    #[test]
    fn dyna_adds_model_transitions() {
        let mut t = Trainer::new(tiny(Technique::Dyna), envs(), 1).unwrap();
        t.train(|_, _| Ok(())).unwrap();
        assert_eq!(t.buffer().count(Source::Real), 600);
        // The model first trains at 200 steps; every round from then on is augmented.
        assert_eq!(t.buffer().count(Source::Model), 500);
    }

    #[test]
    fn mpc_policy_round_trips_through_checkpoint() {
        let mut t = Trainer::new(tiny(Technique::Mpc), envs(), 2).unwrap();
        t.train(|_, _| Ok(())).unwrap();
        assert!(t.agent().is_none());
        let p = t.policy();
        let back = TrainedPolicy::from_checkpoint(&Checkpoint::from_json_str(&p.to_checkpoint().to_json_string()).unwrap()).unwrap();
        assert_eq!(back.technique, Technique::Mpc);
        let w = crate::rl::history::Frame::root(vec![1.0; 10], 2);
        let mut r1 = rng_from_seed(0);
        let mut r2 = rng_from_seed(0);
        assert_eq!(
            p.greedy().act(&w, &p.layout, &mut r1).unwrap(),
            back.greedy().act(&w, &back.layout, &mut r2).unwrap()
        );
    }

    #[test]
    fn serial_training_is_reproducible() {
        let run = || {
            let mut t = Trainer::new(tiny(Technique::Lagrangian), envs(), 3).unwrap();
            t.train(|_, _| Ok(())).unwrap();
            t.agent().unwrap().actor().params()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = tiny(Technique::Baseline);
        c.history = 3;
        assert!(Trainer::new(c, envs(), 0).is_err());
        let mut c = tiny(Technique::Baseline);
        c.checkpoints = vec![10_000];
        assert!(Trainer::new(c, envs(), 0).is_err());
        assert!(Trainer::new(tiny(Technique::Baseline), Vec::new(), 0).is_err());
        assert!("ppo".parse::<Technique>().is_err());
        assert_eq!("dyna".parse::<Technique>().unwrap(), Technique::Dyna);
    }
}
