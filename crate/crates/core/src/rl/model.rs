//! Learned one-step dynamics over observation features.

use super::buffer::{ReplayBuffer, Transition};
use super::features::FeatureConfig;
use super::history::WindowLayout;
use super::RlError;
use crate::nn::{gaussian_nll_batch, mse_loss, Activation, AdamConfig, AdamState, Checkpoint, Head, Mlp, NnError};
use crate::sim::{compute_reward, RewardCoefficients, SimConfig};
use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Per-column running mean and variance (Welford).
#[derive(Debug, Clone, PartialEq)]
pub struct RunningNorm {
    count: f64,
    mean: Array1<f64>,
    m2: Array1<f64>,
    std_floor: f64,
}

impl RunningNorm {
    pub fn new(width: usize, std_floor: f64) -> Self {
        Self {
            count: 0.0,
            mean: Array1::zeros(width),
            m2: Array1::zeros(width),
            std_floor,
        }
    }

    pub fn count(&self) -> f64 {
        self.count
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn update(&mut self, rows: &Array2<f64>) {
        for row in rows.rows() {
            self.count += 1.0;
            let delta = &row - &self.mean;
            self.mean = &self.mean + &(&delta / self.count);
            let delta2 = &row - &self.mean;
            self.m2 = &self.m2 + &(&delta * &delta2);
        }
    }

    pub fn std(&self) -> Array1<f64> {
        if self.count < 2.0 {
            return Array1::ones(self.mean.len());
        }
        self.m2.mapv(|m| (m / self.count).sqrt().max(self.std_floor))
    }

    pub fn normalize(&self, rows: &Array2<f64>) -> Array2<f64> {
        (rows - &self.mean) / &self.std()
    }

    pub fn denormalize(&self, rows: &Array2<f64>) -> Array2<f64> {
        rows * &self.std() + &self.mean
    }

    fn store(&self, ck: Checkpoint, prefix: &str) -> Checkpoint {
        ck.with_vector(&format!("{prefix}.count"), &[self.count, self.std_floor])
            .with_vector(&format!("{prefix}.mean"), self.mean.as_slice().expect("contiguous"))
            .with_vector(&format!("{prefix}.m2"), self.m2.as_slice().expect("contiguous"))
    }

    fn load(ck: &Checkpoint, prefix: &str, width: usize) -> Result<Self, NnError> {
        let count = ck.vector(&format!("{prefix}.count"))?;
        let mean = ck.vector(&format!("{prefix}.mean"))?;
        let m2 = ck.vector(&format!("{prefix}.m2"))?;
        if count.len() != 2 || mean.len() != width || m2.len() != width {
            return Err(NnError::Checkpoint(format!("normalization `{prefix}` has the wrong width")));
        }
        Ok(Self {
            count: count[0],
            std_floor: count[1],
            mean: Array1::from(mean.to_vec()),
            m2: Array1::from(m2.to_vec()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub hidden: Vec<usize>,
    /// Gaussian head (mean and log-variance) instead of a point prediction.
    pub probabilistic: bool,
    pub lr: f64,
    pub batch_size: usize,
    /// Gradient steps per retraining round.
    pub train_steps: usize,
    /// Environment steps between retraining rounds.
    pub retrain_every: u64,
    /// Real transitions sampled to refresh normalization statistics.
    pub norm_samples: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            probabilistic: false,
            lr: 1e-3,
            batch_size: 256,
            train_steps: 1_000,
            retrain_every: 5_000,
            norm_samples: 5_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DynamicsModel {
    pub config: DynamicsConfig,
    net: Mlp,
    opt: AdamState,
    in_norm: RunningNorm,
    out_norm: RunningNorm,
    out_dim: usize,
}

const STD_FLOOR: f64 = 1e-3;

impl DynamicsModel {
    pub fn new(input_dim: usize, output_dim: usize, config: DynamicsConfig, seed: u64) -> Result<Self, RlError> {
        let mut dims = vec![input_dim];
        dims.extend(&config.hidden);
        let head = if config.probabilistic {
            dims.push(2 * output_dim);
            Head::Gaussian
        } else {
            dims.push(output_dim);
            Head::Linear
        };
        let net = Mlp::new(&dims, Activation::Relu, head, seed)?;
        Ok(Self {
            opt: AdamState::new(&net, AdamConfig::with_lr(config.lr)),
            net,
            in_norm: RunningNorm::new(input_dim, STD_FLOOR),
            out_norm: RunningNorm::new(output_dim, STD_FLOOR),
            out_dim: output_dim,
            config,
        })
    }

    /// Model for a history layout: input is the window plus the action, output the
    /// change of the newest observation features.
    pub fn for_layout(layout: &WindowLayout, config: DynamicsConfig, seed: u64) -> Result<Self, RlError> {
        Self::new(layout.width() + layout.action_width, layout.obs_width, config, seed)
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.out_dim
    }

    pub fn is_probabilistic(&self) -> bool {
        self.config.probabilistic
    }

    pub fn update_normalization(&mut self, x: &Array2<f64>, y: &Array2<f64>) {
        self.in_norm.update(x);
        self.out_norm.update(y);
    }

    /// One gradient step on raw inputs and targets; returns the loss in normalized units.
    pub fn train_step(&mut self, x: &Array2<f64>, y: &Array2<f64>) -> Result<f64, RlError> {
        let xn = self.in_norm.normalize(x);
        let yn = self.out_norm.normalize(y);
        let cache = self.net.forward(&xn)?;
        let (loss, grad) = if self.config.probabilistic {
            gaussian_nll_batch(cache.output(), &yn)
        } else {
            mse_loss(cache.output(), &yn)
        };
        let (g, _) = self.net.backward(&cache, &grad)?;
        self.opt.step(&mut self.net, &g)?;
        Ok(loss)
    }

    /// Fits on a fixed dataset with uniformly sampled minibatches.
    pub fn fit<R: Rng>(
        &mut self,
        x: &Array2<f64>,
        y: &Array2<f64>,
        steps: usize,
        batch: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>, RlError> {
        if x.nrows() == 0 {
            return Err(RlError::EmptyBuffer);
        }
        self.update_normalization(x, y);
        let mut losses = Vec::with_capacity(steps);
        for _ in 0..steps {
            let idx: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..x.nrows())).collect();
            losses.push(self.train_step(&x.select(Axis(0), &idx), &y.select(Axis(0), &idx))?);
        }
        Ok(losses)
    }

    /// Mean prediction and, for the gaussian head, log-variance, both in target units.
    pub fn predict(&self, x: &Array2<f64>) -> Result<(Array2<f64>, Option<Array2<f64>>), RlError> {
        let out = self.net.predict(&self.in_norm.normalize(x))?;
        let k = self.out_dim;
        let mean = self.out_norm.denormalize(&out.slice(s![.., ..k]).to_owned());
        if !self.config.probabilistic {
            return Ok((mean, None));
        }
        let log_std2 = self.out_norm.std().mapv(|s| 2.0 * s.ln());
        let log_var = &out.slice(s![.., k..]) + &log_std2;
        Ok((mean, Some(log_var)))
    }

    /// A draw from the predictive distribution; the mean for a deterministic head.
    pub fn sample<R: Rng>(&self, x: &Array2<f64>, rng: &mut R) -> Result<Array2<f64>, RlError> {
        let (mean, log_var) = self.predict(x)?;
        Ok(match log_var {
            None => mean,
            Some(lv) => {
                let noise = Array2::from_shape_fn(mean.dim(), |_| rng.sample::<f64, _>(StandardNormal));
                mean + lv.mapv(|l| (0.5 * l).exp()) * noise
            }
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let ck = Checkpoint::new().with_network("dynamics", &self.net);
        let ck = self.in_norm.store(ck, "input_norm");
        self.out_norm.store(ck, "target_norm")
    }

    /// Restores the network and statistics; optimizer moments start fresh.
    pub fn from_checkpoint(ck: &Checkpoint, config: DynamicsConfig) -> Result<Self, RlError> {
        let net = ck.network("dynamics")?;
        let probabilistic = net.head() == Head::Gaussian;
        let out_dim = if probabilistic { net.output_dim() / 2 } else { net.output_dim() };
        let config = DynamicsConfig { probabilistic, ..config };
        Ok(Self {
            opt: AdamState::new(&net, AdamConfig::with_lr(config.lr)),
            in_norm: RunningNorm::load(ck, "input_norm", net.input_dim())?,
            out_norm: RunningNorm::load(ck, "target_norm", out_dim)?,
            net,
            out_dim,
            config,
        })
    }

    /// Refreshes statistics and takes `train_steps` steps on real transitions.
    pub fn train_from_buffer<R: Rng>(
        &mut self,
        buffer: &ReplayBuffer,
        layout: &WindowLayout,
        rng: &mut R,
    ) -> Result<f64, RlError> {
        let stats = buffer.sample_real(self.config.norm_samples.max(1), rng)?;
        let (x, y) = model_dataset(&stats, layout);
        self.update_normalization(&x, &y);
        let mut last = 0.0;
        for _ in 0..self.config.train_steps {
            let batch = buffer.sample_real(self.config.batch_size, rng)?;
            let (x, y) = model_dataset(&batch, layout);
            last = self.train_step(&x, &y)?;
        }
        Ok(last)
    }
}

/// Model input row: the window followed by the action.
pub fn model_input(window: &[f64], action: &[f64]) -> Vec<f64> {
    let mut row = window.to_vec();
    row.extend_from_slice(action);
    row
}

/// Inputs and delta targets of transitions.
pub fn model_dataset(batch: &[&Transition], layout: &WindowLayout) -> (Array2<f64>, Array2<f64>) {
    let w = layout.width();
    let a = layout.action_width;
    let f = layout.obs_width;
    let mut x = Array2::zeros((batch.len(), w + a));
    let mut y = Array2::zeros((batch.len(), f));
    for (i, t) in batch.iter().enumerate() {
        let mut row = x.row_mut(i);
        let row = row.as_slice_mut().expect("row is contiguous");
        t.obs.write_window(layout, &mut row[..w]);
        row[w..].copy_from_slice(&t.action);
        let cur = t.obs.features(layout);
        let next = t.next_obs.features(layout);
        for j in 0..f {
            y[[i, j]] = next[j] - cur[j];
        }
    }
    (x, y)
}

/// Reward, cost and termination computed from observation features alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownReward {
    pub features: FeatureConfig,
    pub coefficients: RewardCoefficients,
    pub robot_radius: f64,
    pub goal_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureEvent {
    pub reward: f64,
    pub cost: f64,
    pub collision: bool,
    pub success: bool,
}

impl FeatureEvent {
    pub fn done(&self) -> bool {
        self.collision || self.success
    }
}

impl KnownReward {
    pub fn new(features: FeatureConfig, sim: &SimConfig) -> Self {
        Self {
            features,
            coefficients: sim.reward,
            robot_radius: sim.robot_radius,
            goal_radius: sim.goal_radius,
        }
    }

    pub fn evaluate(&self, prev: &[f64], next: &[f64]) -> FeatureEvent {
        let collision = self.features.min_range(next) <= self.robot_radius;
        let success = !collision && self.features.goal_distance(next) < self.goal_radius;
        let reward = compute_reward(
            &self.coefficients,
            self.features.goal_distance(prev),
            self.features.goal_distance(next),
            collision,
            success,
        );
        FeatureEvent {
            reward,
            cost: if collision { 1.0 } else { 0.0 },
            collision,
            success,
        }
    }

    /// Keeps predicted features physically plausible.
    pub fn clamp_features(&self, features: &mut [f64]) {
        let bins = self.features.lidar_bins;
        for v in &mut features[..bins] {
            *v = v.clamp(0.0, self.features.max_range);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn linear_data(n: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
        // s' = s + a, so the delta target is a.
        let mut rng = rng_from_seed(seed);
        let x = Array2::from_shape_fn((n, 4), |_| rng.gen_range(-1.0..1.0));
        let y = x.slice(s![.., 2..]).to_owned();
        (x, y)
    }

    fn mse(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        (a - b).mapv(|v| v * v).mean().unwrap()
    }

    #[test]
    fn running_norm_matches_batch_statistics() {
        let mut rng = rng_from_seed(2);
        let x = Array2::from_shape_fn((500, 3), |(_, j)| rng.gen_range(-1.0..1.0) * (j + 1) as f64 + j as f64);
        let mut n = RunningNorm::new(3, 1e-3);
        n.update(&x.slice(s![..200, ..]).to_owned());
        n.update(&x.slice(s![200.., ..]).to_owned());
        let mean = x.mean_axis(Axis(0)).unwrap();
        let std = x.std_axis(Axis(0), 0.0);
        for j in 0..3 {
            assert!((n.mean()[j] - mean[j]).abs() < 1e-12);
            assert!((n.std()[j] - std[j]).abs() < 1e-12);
        }
        let back = n.denormalize(&n.normalize(&x));
        assert!(mse(&back, &x) < 1e-24);
    }

    #[test]
    fn deterministic_model_learns_linear_system() {
        let (x, y) = linear_data(4_000, 0);
        let (xt, yt) = linear_data(1_000, 1);
        let cfg = DynamicsConfig {
            hidden: vec![64, 64],
            ..DynamicsConfig::default()
        };
        let mut m = DynamicsModel::new(4, 2, cfg, 3).unwrap();
        let mut rng = rng_from_seed(4);
        m.fit(&x, &y, 6_000, 128, &mut rng).unwrap();
        let (pred, lv) = m.predict(&xt).unwrap();
        assert!(lv.is_none());
        let err = mse(&pred, &yt);
        assert!(err <= 1e-4, "held-out mse {err}");
    }

    #[test]
    fn shuffled_targets_give_variance_baseline() {
        let (x, y) = linear_data(2_000, 5);
        let mut rng = rng_from_seed(6);
        // Targets drawn independently of the inputs.
        let y_shuffled = Array2::from_shape_fn(y.dim(), |_| rng.gen_range(-1.0..1.0));
        let (xt, _) = linear_data(1_000, 7);
        let yt = Array2::from_shape_fn((1_000, 2), |_| rng.gen_range(-1.0..1.0));
        let cfg = DynamicsConfig {
            hidden: vec![32],
            lr: 3e-4,
            ..DynamicsConfig::default()
        };
        let mut m = DynamicsModel::new(4, 2, cfg, 8).unwrap();
        m.fit(&x, &y_shuffled, 1_500, 128, &mut rng).unwrap();
        let (pred, _) = m.predict(&xt).unwrap();
        let var = 1.0 / 3.0;
        let err = mse(&pred, &yt);
        assert!((err - var).abs() < 0.15 * var, "mse {err} vs variance {var}");
        let _ = y;
    }

    #[test]
    fn noiseless_probabilistic_model_reaches_variance_floor() {
        let (x, y) = linear_data(2_000, 9);
        let cfg = DynamicsConfig {
            hidden: vec![64, 64],
            probabilistic: true,
            ..DynamicsConfig::default()
        };
        let mut m = DynamicsModel::new(4, 2, cfg, 10).unwrap();
        let mut rng = rng_from_seed(11);
        m.fit(&x, &y, 6_000, 128, &mut rng).unwrap();
        let xn = m.in_norm.normalize(&x.slice(s![..200, ..]).to_owned());
        let out = m.net.predict(&xn).unwrap();
        let lv = out.slice(s![.., 2..]).mean().unwrap();
        assert!(lv < crate::nn::LOG_VAR_MIN + 2.0, "mean normalized log-variance {lv}");
        assert!(lv >= crate::nn::LOG_VAR_MIN);
    }

    #[test]
    fn checkpoint_round_trip() {
        let (x, y) = linear_data(300, 12);
        let cfg = DynamicsConfig {
            hidden: vec![8],
            probabilistic: true,
            ..DynamicsConfig::default()
        };
        let mut m = DynamicsModel::new(4, 2, cfg.clone(), 13).unwrap();
        m.fit(&x, &y, 20, 16, &mut rng_from_seed(0)).unwrap();
        let ck = Checkpoint::from_json_str(&m.to_checkpoint().to_json_string()).unwrap();
        let back = DynamicsModel::from_checkpoint(&ck, DynamicsConfig::default()).unwrap();
        assert!(back.is_probabilistic());
        assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());
    }

    #[test]
    fn known_reward_from_features() {
        let feats = FeatureConfig {
            lidar_bins: 4,
            ..FeatureConfig::default()
        };
        let k = KnownReward::new(feats, &SimConfig::default());
        let prev = [5.0, 5.0, 5.0, 5.0, 0.0, 1.0];
        let e = k.evaluate(&prev, &[5.0, 5.0, 5.0, 5.0, 0.0, 0.3]);
        assert!(e.success && !e.collision);
        assert!((e.reward - (20.0 + 0.7)).abs() < 1e-12);
        let e = k.evaluate(&prev, &[5.0, 0.2, 5.0, 5.0, 0.0, 0.3]);
        assert!(e.collision && !e.success);
        assert_eq!(e.cost, 1.0);
        assert!((e.reward - (0.7 - 4.0)).abs() < 1e-12);
    }
}
