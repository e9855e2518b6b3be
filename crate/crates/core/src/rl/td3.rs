//! Twin-critic deterministic actor-critic with target smoothing and delayed actor updates.

use super::buffer::Transition;
use super::history::WindowLayout;
use super::RlError;
use crate::nn::{mse_loss, Activation, AdamConfig, AdamState, Checkpoint, Head, Mlp, NnError};
use crate::seed::{derive_seed, rng_from_seed};
use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const ACTION_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub policy_delay: u32,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub hidden: Vec<usize>,
    /// Gaussian exploration noise in normalized action units.
    pub exploration_noise: f64,
    pub warmup_steps: u64,
    /// Gradient updates per environment step.
    pub updates_per_step: u32,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            policy_noise: 0.2,
            noise_clip: 0.5,
            policy_delay: 2,
            batch_size: 128,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            hidden: vec![128, 128],
            exploration_noise: 0.2,
            warmup_steps: 5_000,
            updates_per_step: 1,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if self.policy_delay < 1 {
            return Err("policy_delay must be at least 1".into());
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if self.batch_size == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err("batch_size and hidden sizes must be positive".into());
        }
        Ok(())
    }
}

/// Bootstrapped critic target `r + γ·(1 − done)·min(q1, q2)`.
pub fn td3_target(reward: f64, done: bool, q1: f64, q2: f64, gamma: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * q1.min(q2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Td3Losses {
    pub critic: f64,
    pub actor: Option<f64>,
}

/// Deterministic actor plus its input scaling; cheap to clone and share.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorSnapshot {
    pub actor: Mlp,
    pub input_scale: Vec<f64>,
}

impl ActorSnapshot {
    pub fn act(&self, window: &[f64]) -> [f64; 2] {
        let x: Vec<f64> = window.iter().zip(&self.input_scale).map(|(v, s)| v * s).collect();
        let y = self.actor.predict_one(&x).expect("actor input width");
        [y[0], y[1]]
    }
}

#[derive(Debug, Clone)]
pub struct Td3Agent {
    pub config: Td3Config,
    input_scale: Vec<f64>,
    actor: Mlp,
    actor_target: Mlp,
    critics: [Mlp; 2],
    critic_targets: [Mlp; 2],
    actor_opt: AdamState,
    critic_opts: [AdamState; 2],
    updates: u64,
    rng: ChaCha8Rng,
}

impl Td3Agent {
    pub fn new(input_scale: Vec<f64>, config: Td3Config, seed: u64) -> Result<Self, RlError> {
        config.validate().map_err(RlError::Config)?;
        let n = input_scale.len();
        let mut actor_dims = vec![n];
        actor_dims.extend(&config.hidden);
        actor_dims.push(ACTION_DIM);
        let mut critic_dims = vec![n + ACTION_DIM];
        critic_dims.extend(&config.hidden);
        critic_dims.push(1);
        let actor = Mlp::new(&actor_dims, Activation::Relu, Head::Tanh, derive_seed(seed, "actor", 0))?;
        let c0 = Mlp::new(&critic_dims, Activation::Relu, Head::Linear, derive_seed(seed, "critic", 0))?;
        let c1 = Mlp::new(&critic_dims, Activation::Relu, Head::Linear, derive_seed(seed, "critic", 1))?;
        Ok(Self {
            actor_opt: AdamState::new(&actor, AdamConfig::with_lr(config.actor_lr)),
            critic_opts: [
                AdamState::new(&c0, AdamConfig::with_lr(config.critic_lr)),
                AdamState::new(&c1, AdamConfig::with_lr(config.critic_lr)),
            ],
            actor_target: actor.clone(),
            critic_targets: [c0.clone(), c1.clone()],
            actor,
            critics: [c0, c1],
            input_scale,
            config,
            updates: 0,
            rng: rng_from_seed(derive_seed(seed, "td3-noise", 0)),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_scale.len()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn actor_target(&self) -> &Mlp {
        &self.actor_target
    }

    pub fn critic(&self, i: usize) -> &Mlp {
        &self.critics[i]
    }

    pub fn critic_target(&self, i: usize) -> &Mlp {
        &self.critic_targets[i]
    }

    pub fn snapshot(&self) -> ActorSnapshot {
        ActorSnapshot {
            actor: self.actor.clone(),
            input_scale: self.input_scale.clone(),
        }
    }

    pub fn act(&self, window: &[f64]) -> [f64; 2] {
        self.snapshot().act(window)
    }

    fn scaled(&self, rows: &Array2<f64>) -> Array2<f64> {
        rows * &Array1::from(self.input_scale.clone())
    }

    /// Critic values `(Q1, Q2)` of unscaled windows and normalized actions.
    pub fn q_values(&self, windows: &Array2<f64>, actions: &Array2<f64>) -> Result<(Array1<f64>, Array1<f64>), RlError> {
        let x = concatenate![Axis(1), self.scaled(windows), actions.view()];
        let q1 = self.critics[0].predict(&x)?.column(0).to_owned();
        let q2 = self.critics[1].predict(&x)?.column(0).to_owned();
        Ok((q1, q2))
    }

    /// One update on sampled transitions; rewards are shaped by `lambda · cost`.
    pub fn update(&mut self, batch: &[&Transition], layout: &WindowLayout, lambda: f64) -> Result<Td3Losses, RlError> {
        if batch.is_empty() {
            return Err(RlError::EmptyBuffer);
        }
        let n = batch.len();
        let w = layout.width();
        let mut s = Array2::zeros((n, w));
        let mut s2 = Array2::zeros((n, w));
        let mut a = Array2::zeros((n, ACTION_DIM));
        let mut r = Array1::zeros(n);
        let mut d = Array1::from_elem(n, false);
        for (i, t) in batch.iter().enumerate() {
            t.obs.write_window(layout, s.row_mut(i).as_slice_mut().expect("row is contiguous"));
            t.next_obs.write_window(layout, s2.row_mut(i).as_slice_mut().expect("row is contiguous"));
            a[[i, 0]] = t.action[0];
            a[[i, 1]] = t.action[1];
            r[i] = t.reward - lambda * t.cost;
            d[i] = t.done;
        }
        self.update_arrays(&s, &a, &r, &d, &s2)
    }

    /// Update from dense arrays: unscaled windows, normalized actions, rewards,
    /// terminal flags and next windows.
    pub fn update_arrays(
        &mut self,
        s: &Array2<f64>,
        a: &Array2<f64>,
        r: &Array1<f64>,
        done: &Array1<bool>,
        s2: &Array2<f64>,
    ) -> Result<Td3Losses, RlError> {
        let n = s.nrows();
        let cfg = self.config.clone();
        let s = self.scaled(s);
        let s2 = self.scaled(s2);

        let mut a2 = self.actor_target.predict(&s2)?;
        for v in a2.iter_mut() {
            let eps: f64 = self.rng.sample::<f64, _>(StandardNormal) * cfg.policy_noise;
            *v = (*v + eps.clamp(-cfg.noise_clip, cfg.noise_clip)).clamp(-1.0, 1.0);
        }
        let x2 = concatenate![Axis(1), s2, a2];
        let q1t = self.critic_targets[0].predict(&x2)?;
        let q2t = self.critic_targets[1].predict(&x2)?;
        let y = Array2::from_shape_fn((n, 1), |(i, _)| td3_target(r[i], done[i], q1t[[i, 0]], q2t[[i, 0]], cfg.gamma));

        let x = concatenate![Axis(1), s, a.view()];
        let mut critic_loss = 0.0;
        for k in 0..2 {
            let cache = self.critics[k].forward(&x)?;
            let (loss, grad) = mse_loss(cache.output(), &y);
            let (g, _) = self.critics[k].backward(&cache, &grad)?;
            self.critic_opts[k].step(&mut self.critics[k], &g)?;
            critic_loss += loss;
        }
        self.updates += 1;

        let mut actor_loss = None;
        if self.updates % cfg.policy_delay as u64 == 0 {
            let a_cache = self.actor.forward(&s)?;
            let xa = concatenate![Axis(1), s, a_cache.output().view()];
            let q_cache = self.critics[0].forward(&xa)?;
            actor_loss = Some(-q_cache.output().mean().unwrap_or(0.0));
            let grad_q = Array2::from_elem((n, 1), -1.0 / n as f64);
            let (_, dx) = self.critics[0].backward(&q_cache, &grad_q)?;
            let da = dx.slice(s![.., s.ncols()..]).to_owned();
            let (g, _) = self.actor.backward(&a_cache, &da)?;
            self.actor_opt.step(&mut self.actor, &g)?;

            self.actor_target.soft_update_from(&self.actor, cfg.tau)?;
            for k in 0..2 {
                self.critic_targets[k].soft_update_from(&self.critics[k], cfg.tau)?;
            }
        }
        Ok(Td3Losses {
            critic: critic_loss / 2.0,
            actor: actor_loss,
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new()
            .with_network("actor", &self.actor)
            .with_network("actor_target", &self.actor_target)
            .with_network("critic1", &self.critics[0])
            .with_network("critic2", &self.critics[1])
            .with_network("critic1_target", &self.critic_targets[0])
            .with_network("critic2_target", &self.critic_targets[1])
            .with_vector("input_scale", &self.input_scale)
    }

    /// Restores networks from a checkpoint; optimizer moments start fresh.
    pub fn from_checkpoint(ck: &Checkpoint, config: Td3Config, seed: u64) -> Result<Self, RlError> {
        let mut agent = Self::new(ck.vector("input_scale")?.to_vec(), config, seed)?;
        let load = |name: &str, dst: &mut Mlp| -> Result<(), NnError> {
            let net = ck.network(name)?;
            if net.dims() != dst.dims() {
                return Err(NnError::Checkpoint(format!("network `{name}` has dims {:?}", net.dims())));
            }
            *dst = net;
            Ok(())
        };
        load("actor", &mut agent.actor)?;
        load("actor_target", &mut agent.actor_target)?;
        load("critic1", &mut agent.critics[0])?;
        load("critic2", &mut agent.critics[1])?;
        load("critic1_target", &mut agent.critic_targets[0])?;
        load("critic2_target", &mut agent.critic_targets[1])?;
        Ok(agent)
    }
}

/// Reads the actor of a checkpoint written by [`Td3Agent::to_checkpoint`].
pub fn actor_from_checkpoint(ck: &Checkpoint) -> Result<ActorSnapshot, RlError> {
    let actor = ck.network("actor")?;
    let input_scale = ck.vector("input_scale")?.to_vec();
    if actor.input_dim() != input_scale.len() {
        return Err(RlError::Config("actor input width does not match its scaling vector".into()));
    }
    Ok(ActorSnapshot { actor, input_scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_examples() {
        assert_eq!(td3_target(0.0, false, 2.0, 1.0, 0.99), 0.99);
        assert_eq!(td3_target(3.5, true, 100.0, -7.0, 0.99), 3.5);
    }

    #[test]
    fn bounded_actions() {
        let agent = Td3Agent::new(vec![1.0; 6], Td3Config::default(), 0).unwrap();
        for k in 0..20 {
            let w: Vec<f64> = (0..6).map(|i| ((i * k) as f64).sin() * 50.0).collect();
            let a = agent.act(&w);
            assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn target_moves_by_at_most_tau_of_gap() {
        let cfg = Td3Config {
            policy_delay: 1,
            hidden: vec![8],
            batch_size: 4,
            ..Td3Config::default()
        };
        let mut agent = Td3Agent::new(vec![1.0; 3], cfg.clone(), 1).unwrap();
        let s = Array2::from_shape_fn((4, 3), |(i, j)| (i + j) as f64 * 0.1);
        let a = Array2::from_elem((4, 2), 0.3);
        let r = Array1::from(vec![1.0, 0.0, -1.0, 0.5]);
        let d = Array1::from(vec![false, true, false, false]);
        for _ in 0..5 {
            let before = Array1::from(agent.critic_target(0).params());
            agent.update_arrays(&s, &a, &r, &d, &s).unwrap();
            let online = Array1::from(agent.critic(0).params());
            let after = Array1::from(agent.critic_target(0).params());
            let step = (&after - &before).mapv(|v| v * v).sum().sqrt();
            let gap = (&online - &before).mapv(|v| v * v).sum().sqrt();
            assert!(step <= cfg.tau * gap * (1.0 + 1e-9) + 1e-15);
        }
    }

    #[test]
    fn two_state_chain_converges_to_bellman_values() {
        // s0 → s1 with reward 1, s1 → s0 with reward 0; actions have no effect.
        let gamma = 0.9;
        let q0 = 1.0 / (1.0 - gamma * gamma);
        let q1 = gamma / (1.0 - gamma * gamma);
        let cfg = Td3Config {
            gamma,
            tau: 0.05,
            hidden: vec![32, 32],
            critic_lr: 1e-3,
            actor_lr: 1e-4,
            batch_size: 64,
            ..Td3Config::default()
        };
        let mut agent = Td3Agent::new(vec![1.0], cfg, 4).unwrap();
        let mut rng = rng_from_seed(9);
        for _ in 0..6_000 {
            let n = 64;
            let mut s = Array2::zeros((n, 1));
            let mut s2 = Array2::zeros((n, 1));
            let mut r = Array1::zeros(n);
            let a = Array2::from_shape_fn((n, 2), |_| rng.gen_range(-1.0..1.0));
            for i in 0..n {
                let from = (i % 2) as f64;
                s[[i, 0]] = from;
                s2[[i, 0]] = 1.0 - from;
                r[i] = if from == 0.0 { 1.0 } else { 0.0 };
            }
            agent.update_arrays(&s, &a, &r, &Array1::from_elem(n, false), &s2).unwrap();
        }
        let probe_s = Array2::from_shape_vec((2, 1), vec![0.0, 1.0]).unwrap();
        let probe_a = Array2::from_shape_fn((2, 2), |_| 0.0);
        let (v1, v2) = agent.q_values(&probe_s, &probe_a).unwrap();
        for (q, want) in [(v1[0], q0), (v1[1], q1), (v2[0], q0), (v2[1], q1)] {
            assert!((q - want).abs() < 1e-2, "Q {q} vs {want}");
        }
    }

    #[test]
    fn checkpoint_round_trip_restores_policy() {
        let agent = Td3Agent::new(vec![0.5; 4], Td3Config::default(), 2).unwrap();
        let ck = Checkpoint::from_json_str(&agent.to_checkpoint().to_json_string()).unwrap();
        let back = Td3Agent::from_checkpoint(&ck, Td3Config::default(), 99).unwrap();
        let w = [0.1, -0.3, 2.0, 1.0];
        assert_eq!(back.act(&w), agent.act(&w));
        assert_eq!(actor_from_checkpoint(&ck).unwrap().act(&w), agent.act(&w));
    }
}
