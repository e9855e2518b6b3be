//! Planning and imagination with a dynamics model: random-shooting MPC and
//! Dyna-style replay augmentation.

use super::buffer::{ReplayBuffer, Source, Transition};
use super::features::FeatureConfig;
use super::history::{Frame, Window, WindowLayout};
use super::model::{DynamicsModel, KnownReward};
use super::RlError;
use crate::sim::{Outcome, Simulator};
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone)]
pub struct ModelStep<S> {
    pub state: S,
    pub reward: f64,
    pub cost: f64,
    pub done: bool,
}

/// One-step transition model over normalized actions.
pub trait WorldModel {
    type State: Clone;

    fn step<R: Rng>(&self, state: &Self::State, action: [f64; 2], rng: &mut R) -> Result<ModelStep<Self::State>, RlError>;

    fn step_batch<R: Rng>(
        &self,
        states: &[Self::State],
        actions: &[[f64; 2]],
        rng: &mut R,
    ) -> Result<Vec<ModelStep<Self::State>>, RlError> {
        states.iter().zip(actions).map(|(s, a)| self.step(s, *a, rng)).collect()
    }
}

/// Learned dynamics over history windows with the known reward function.
#[derive(Debug, Clone, Copy)]
pub struct LearnedModel<'a> {
    pub model: &'a DynamicsModel,
    pub layout: WindowLayout,
    pub reward: KnownReward,
    /// Draw from the predictive distribution instead of using its mean.
    pub sample: bool,
}

impl<'a> WorldModel for LearnedModel<'a> {
    type State = Window;

    fn step<R: Rng>(&self, state: &Window, action: [f64; 2], rng: &mut R) -> Result<ModelStep<Window>, RlError> {
        Ok(self.step_batch(std::slice::from_ref(state), &[action], rng)?.remove(0))
    }

    fn step_batch<R: Rng>(&self, states: &[Window], actions: &[[f64; 2]], rng: &mut R) -> Result<Vec<ModelStep<Window>>, RlError> {
        let w = self.layout.width();
        let mut x = Array2::zeros((states.len(), w + 2));
        for (i, (s, a)) in states.iter().zip(actions).enumerate() {
            let mut row = x.row_mut(i);
            let row = row.as_slice_mut().expect("row is contiguous");
            s.write_window(&self.layout, &mut row[..w]);
            row[w..].copy_from_slice(a);
        }
        let delta = if self.sample {
            self.model.sample(&x, rng)?
        } else {
            self.model.predict(&x)?.0
        };
        Ok(states
            .iter()
            .zip(actions)
            .zip(delta.rows())
            .map(|((s, a), d)| {
                let prev = s.features(&self.layout);
                let mut next: Vec<f64> = prev.iter().zip(d.iter()).map(|(p, d)| p + d).collect();
                self.reward.clamp_features(&mut next);
                let ev = self.reward.evaluate(prev, &next);
                ModelStep {
                    state: Frame::child(s, next, a),
                    reward: ev.reward,
                    cost: ev.cost,
                    done: ev.done(),
                }
            })
            .collect())
    }
}

/// The simulator itself used as a perfect model.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimulatorModel;

impl WorldModel for SimulatorModel {
    type State = Simulator;

    fn step<R: Rng>(&self, state: &Simulator, action: [f64; 2], _rng: &mut R) -> Result<ModelStep<Simulator>, RlError> {
        let mut sim = state.clone();
        if !sim.is_active() {
            return Ok(ModelStep {
                state: sim,
                reward: 0.0,
                cost: 0.0,
                done: true,
            });
        }
        let a = sim.config().action_bounds.from_unit(action);
        let ev = sim.advance(a)?;
        Ok(ModelStep {
            state: sim,
            reward: ev.reward,
            cost: ev.cost,
            done: ev.outcome != Outcome::Running,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    pub samples: usize,
    pub horizon: usize,
    pub gamma: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            samples: 64,
            horizon: 8,
            gamma: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcDecision {
    pub action: [f64; 2],
    pub best: usize,
    /// Discounted return of every sampled sequence.
    pub returns: Vec<f64>,
    pub sequences: Vec<Vec<[f64; 2]>>,
}

/// Discounted return of an action sequence; stops accumulating once an episode ends.
pub fn score_sequence<M: WorldModel, R: Rng>(
    model: &M,
    state: &M::State,
    actions: &[[f64; 2]],
    gamma: f64,
    rng: &mut R,
) -> Result<f64, RlError> {
    let mut s = state.clone();
    let mut total = 0.0;
    let mut g = 1.0;
    for a in actions {
        let st = model.step(&s, *a, rng)?;
        total += g * st.reward;
        g *= gamma;
        if st.done {
            break;
        }
        s = st.state;
    }
    Ok(total)
}

/// Random-shooting MPC over normalized actions.
pub fn mpc_select_action<M: WorldModel, R: Rng>(
    model: &M,
    state: &M::State,
    config: &MpcConfig,
    rng: &mut R,
) -> Result<MpcDecision, RlError> {
    if config.samples == 0 || config.horizon == 0 {
        return Err(RlError::Config("MPC needs at least one sequence of length one".into()));
    }
    let n = config.samples;
    let sequences: Vec<Vec<[f64; 2]>> = (0..n)
        .map(|_| {
            (0..config.horizon)
                .map(|_| [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)])
                .collect()
        })
        .collect();
    let mut returns = vec![0.0; n];
    let mut states: Vec<M::State> = vec![state.clone(); n];
    let mut live: Vec<usize> = (0..n).collect();
    let mut g = 1.0;
    for t in 0..config.horizon {
        if live.is_empty() {
            break;
        }
        let cur: Vec<M::State> = live.iter().map(|&i| states[i].clone()).collect();
        let acts: Vec<[f64; 2]> = live.iter().map(|&i| sequences[i][t]).collect();
        let steps = model.step_batch(&cur, &acts, rng)?;
        let mut still = Vec::with_capacity(live.len());
        for (&i, st) in live.iter().zip(steps) {
            returns[i] += g * st.reward;
            if !st.done {
                states[i] = st.state;
                still.push(i);
            }
        }
        live = still;
        g *= config.gamma;
    }
    let mut best = 0;
    for i in 1..n {
        if returns[i] > returns[best] {
            best = i;
        }
    }
    Ok(MpcDecision {
        action: sequences[best][0],
        best,
        returns,
        sequences,
    })
}

/// Source of imagined transitions for replay augmentation.
pub trait DynaModel {
    /// A synthetic successor of a real transition's `(obs, action)`, or `None`
    /// when the model cannot imagine one.
    fn imagine<R: Rng>(&self, real: &Transition, rng: &mut R) -> Result<Option<Transition>, RlError>;
}

impl<'a> DynaModel for LearnedModel<'a> {
    fn imagine<R: Rng>(&self, real: &Transition, rng: &mut R) -> Result<Option<Transition>, RlError> {
        let st = self.step(&real.obs, real.action, rng)?;
        Ok(Some(Transition {
            obs: real.obs.clone(),
            action: real.action,
            reward: st.reward,
            cost: st.cost,
            next_obs: st.state,
            done: st.done,
            source: Source::Model,
            sim_state: None,
        }))
    }
}

/// Replays the recorded simulator state of a single environment; exact on
/// deterministic worlds.
#[derive(Debug, Clone)]
pub struct OracleDyna {
    pub sim: Simulator,
    pub features: FeatureConfig,
    pub layout: WindowLayout,
}

impl DynaModel for OracleDyna {
    fn imagine<R: Rng>(&self, real: &Transition, _rng: &mut R) -> Result<Option<Transition>, RlError> {
        let Some(state) = &real.sim_state else {
            return Ok(None);
        };
        let mut sim = self.sim.clone();
        sim.restore(state);
        if !sim.is_active() {
            return Ok(None);
        }
        let r = sim.step(sim.config().action_bounds.from_unit(real.action))?;
        let features = self.features.extract(&r.observation);
        let collision = r.outcome == Outcome::Collision;
        Ok(Some(Transition {
            obs: real.obs.clone(),
            action: real.action,
            reward: r.reward,
            cost: r.cost,
            next_obs: Frame::child(&real.obs, features, &real.action),
            done: collision || r.outcome == Outcome::Success,
            source: Source::Model,
            sim_state: None,
        }))
    }
}

/// Samples `count` real transitions and appends `k` imagined successors for
/// each. Returns the number appended.
pub fn dyna_augment<M: DynaModel, R: Rng>(
    buffer: &mut ReplayBuffer,
    model: &M,
    k: usize,
    count: usize,
    rng: &mut R,
) -> Result<usize, RlError> {
    if k == 0 || count == 0 {
        return Ok(0);
    }
    let seeds: Vec<Transition> = buffer.sample_real(count, rng)?.into_iter().cloned().collect();
    let mut added = 0;
    for real in &seeds {
        for _ in 0..k {
            if let Some(t) = model.imagine(real, rng)? {
                buffer.push(t);
                added += 1;
            }
        }
    }
    Ok(added)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envgen::EnvironmentSpec;
    use crate::seed::rng_from_seed;
    use crate::sim::SimConfig;

    fn empty_sim() -> Simulator {
        let mut sim = Simulator::new(&EnvironmentSpec::empty_field("empty"), SimConfig::default()).unwrap();
        sim.reset(0).unwrap();
        sim
    }

    #[test]
    fn chosen_sequence_dominates_rescoring() {
        let sim = empty_sim();
        let cfg = MpcConfig::default();
        let d = mpc_select_action(&SimulatorModel, &sim, &cfg, &mut rng_from_seed(1)).unwrap();
        assert_eq!(d.returns.len(), 64);
        let mut rng = rng_from_seed(0);
        for (i, seq) in d.sequences.iter().enumerate() {
            let r = score_sequence(&SimulatorModel, &sim, seq, cfg.gamma, &mut rng).unwrap();
            assert_eq!(r, d.returns[i]);
            assert!(d.returns[d.best] >= r);
        }
        assert_eq!(d.action, d.sequences[d.best][0]);
    }

    #[test]
    fn single_step_horizon_is_one_step_argmax() {
        let sim = empty_sim();
        let cfg = MpcConfig {
            samples: 16,
            horizon: 1,
            gamma: 0.99,
        };
        let d = mpc_select_action(&SimulatorModel, &sim, &cfg, &mut rng_from_seed(2)).unwrap();
        let mut rng = rng_from_seed(0);
        let one_step: Vec<f64> = d
            .sequences
            .iter()
            .map(|s| SimulatorModel.step(&sim, s[0], &mut rng).unwrap().reward)
            .collect();
        let best = one_step.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(one_step[d.best], best);
        assert_eq!(one_step.iter().position(|&r| r == best), Some(d.best));
    }

    #[test]
    fn fixed_seed_fixed_action() {
        let sim = empty_sim();
        let a = mpc_select_action(&SimulatorModel, &sim, &MpcConfig::default(), &mut rng_from_seed(5)).unwrap();
        let b = mpc_select_action(&SimulatorModel, &sim, &MpcConfig::default(), &mut rng_from_seed(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_k_leaves_buffer_unchanged() {
        let mut buf = ReplayBuffer::new(8);
        let w = Frame::root(vec![1.0], 2);
        buf.push(Transition {
            obs: w.clone(),
            action: [0.0, 0.0],
            reward: 1.0,
            cost: 0.0,
            next_obs: w,
            done: false,
            source: Source::Real,
            sim_state: None,
        });
        let oracle = OracleDyna {
            sim: empty_sim(),
            features: FeatureConfig::default(),
            layout: WindowLayout::new(1, 74, 2),
        };
        assert_eq!(dyna_augment(&mut buf, &oracle, 0, 10, &mut rng_from_seed(0)).unwrap(), 0);
        assert_eq!(buf.len(), 1);
    }
}
