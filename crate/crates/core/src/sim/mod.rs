//! Planar differential-drive simulation with LiDAR, collision and goal events.

pub mod sensors;
pub mod trace;
mod world;

pub use sensors::{cast_ray, collision_check, goal_distance, raycast, relative_goal, LidarConfig};
pub use world::{Dynamics, GridGeometry, World, WorldSnapshot};

use crate::envgen::EnvironmentSpec;
use crate::geom::{normalize_angle, RobotPose};
use crate::seed::{derive_seed, rng_from_seed};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    Config(String),
    #[error("layout error: {0}")]
    Layout(String),
    #[error("step called before reset")]
    NotReset,
    #[error("step called after the episode ended ({0})")]
    EpisodeOver(Outcome),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub v_min: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self {
            v_min: 0.0,
            v_max: 2.0,
            omega_max: 3.14,
        }
    }
}

impl ActionBounds {
    pub fn clamp(&self, a: Action) -> Action {
        let v = if a.v.is_nan() { self.v_min } else { a.v.clamp(self.v_min, self.v_max) };
        let omega = if a.omega.is_nan() { 0.0 } else { a.omega.clamp(-self.omega_max, self.omega_max) };
        Action { v, omega }
    }

    /// Maps a point of `[-1, 1]²` affinely onto the bounds.
    pub fn from_unit(&self, u: [f64; 2]) -> Action {
        let half = (self.v_max - self.v_min) / 2.0;
        self.clamp(Action {
            v: self.v_min + half * (u[0] + 1.0),
            omega: self.omega_max * u[1],
        })
    }

    pub fn to_unit(&self, a: Action) -> [f64; 2] {
        let half = (self.v_max - self.v_min) / 2.0;
        let v = if half > 0.0 { (a.v - self.v_min) / half - 1.0 } else { 0.0 };
        let w = if self.omega_max > 0.0 { a.omega / self.omega_max } else { 0.0 };
        [v, w]
    }
}

/// Velocity command: linear `v` (m/s) and angular `omega` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub v: f64,
    pub omega: f64,
}

impl Action {
    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub lidar: Vec<f64>,
    pub goal_rel: [f64; 2],
}

impl Observation {
    pub fn goal_distance(&self) -> f64 {
        self.goal_rel[0].hypot(self.goal_rel[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Running,
    Success,
    Collision,
    Timeout,
}

impl Outcome {
    pub fn is_terminal(self) -> bool {
        self != Outcome::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Running => "running",
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub cost: f64,
    pub done: bool,
    pub outcome: Outcome,
    pub sim_time: f64,
}

/// Result of a control step without the LiDAR scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub reward: f64,
    pub cost: f64,
    pub outcome: Outcome,
    pub sim_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardCoefficients {
    pub success: f64,
    pub progress: f64,
    pub collision: f64,
}

impl Default for RewardCoefficients {
    fn default() -> Self {
        Self {
            success: 20.0,
            progress: 1.0,
            collision: 4.0,
        }
    }
}

/// `b_f·[success] + b_p·(d_prev − d_cur) − b_c·[collision]`.
pub fn compute_reward(coeffs: &RewardCoefficients, d_prev: f64, d_cur: f64, collision: bool, success: bool) -> f64 {
    let mut r = coeffs.progress * (d_prev - d_cur);
    if success {
        r += coeffs.success;
    }
    if collision {
        r -= coeffs.collision;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub control_dt: f64,
    pub substeps: u32,
    pub max_steps: u32,
    pub robot_radius: f64,
    pub goal_radius: f64,
    pub wall_thickness: f64,
    pub lidar: LidarConfig,
    pub action_bounds: ActionBounds,
    pub reward: RewardCoefficients,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            control_dt: 0.2,
            substeps: 10,
            max_steps: 400,
            robot_radius: 0.3,
            goal_radius: 0.4,
            wall_thickness: 0.1,
            lidar: LidarConfig::default(),
            action_bounds: ActionBounds::default(),
            reward: RewardCoefficients::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.control_dt > 0.0) {
            return bad(format!("control_dt must be positive, got {}", self.control_dt));
        }
        if self.substeps < 1 {
            return bad("substeps must be at least 1".into());
        }
        if self.max_steps < 1 {
            return bad("max_steps must be at least 1".into());
        }
        if !(self.robot_radius >= 0.0) || !(self.goal_radius > 0.0) || !(self.wall_thickness > 0.0) {
            return bad("robot_radius, goal_radius and wall_thickness must be non-negative/positive".into());
        }
        if self.lidar.beams == 0 || !(self.lidar.max_range > 0.0) {
            return bad("lidar needs at least one beam and a positive range".into());
        }
        let b = &self.action_bounds;
        if !(b.v_min <= b.v_max) || !(b.omega_max >= 0.0) {
            return bad(format!("inconsistent action bounds {b:?}"));
        }
        Ok(())
    }

    pub fn substep_dt(&self) -> f64 {
        self.control_dt / self.substeps as f64
    }

    /// Episode time limit in seconds.
    pub fn time_limit(&self) -> f64 {
        self.control_dt * self.max_steps as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Episode {
    pose: RobotPose,
    /// World time at reset; wall environments start at a seed-dependent phase.
    time_offset: f64,
    steps: u32,
    substeps: u64,
    d_prev: f64,
    d0: f64,
    outcome: Outcome,
}

/// Opaque copy of an episode's mutable state.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState(Episode);

/// One simulated robot in one environment. Cloning is cheap: the world
/// geometry is shared, only episode state is copied.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    env_id: String,
    world: Arc<World>,
    episode: Option<Episode>,
}

impl Simulator {
    pub fn new(env: &EnvironmentSpec, config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        Ok(Self {
            config,
            env_id: env.id.clone(),
            world: Arc::new(World::new(env, config.wall_thickness)),
            episode: None,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn env_id(&self) -> &str {
        &self.env_id
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    /// World time at which an episode with this seed starts.
    pub fn initial_time(&self, episode_seed: u64) -> f64 {
        match self.world.motion_period() {
            Some(period) if matches!(self.world.dynamics, Dynamics::Walls(_)) => {
                rng_from_seed(derive_seed(episode_seed, "wall-phase", 0)).gen_range(0.0..period)
            }
            _ => 0.0,
        }
    }

    /// Starts an episode at the layout's start pose.
    pub fn reset(&mut self, episode_seed: u64) -> Result<Observation, SimError> {
        let layout = &self.world.layout;
        let (start, goal) = (layout.start, layout.goal);
        let t0 = self.initial_time(episode_seed);
        let snap = self.world.at_time(t0);
        if collision_check(&start, &snap, self.config.robot_radius) {
            return Err(SimError::Layout(format!("start pose of `{}` is inside an obstacle", self.env_id)));
        }
        if collision_check(&RobotPose::new(goal.x, goal.y, 0.0), &snap, 0.0) {
            return Err(SimError::Layout(format!("goal of `{}` is inside an obstacle", self.env_id)));
        }
        Ok(self.reset_at(start, episode_seed))
    }

    /// Starts an episode at an arbitrary pose, without the start-pose checks.
    pub fn reset_at(&mut self, pose: RobotPose, episode_seed: u64) -> Observation {
        let pose = RobotPose::new(pose.x, pose.y, pose.theta);
        let d0 = goal_distance(&pose, self.world.layout.goal);
        self.episode = Some(Episode {
            pose,
            time_offset: self.initial_time(episode_seed),
            steps: 0,
            substeps: 0,
            d_prev: d0,
            d0,
            outcome: Outcome::Running,
        });
        self.observe()
    }

    fn episode(&self) -> &Episode {
        self.episode.as_ref().expect("simulator has not been reset")
    }

    pub fn state(&self) -> Option<SimState> {
        self.episode.clone().map(SimState)
    }

    pub fn restore(&mut self, state: &SimState) {
        self.episode = Some(state.0.clone());
    }

    pub fn is_active(&self) -> bool {
        self.episode.as_ref().is_some_and(|e| e.outcome == Outcome::Running)
    }

    pub fn pose(&self) -> RobotPose {
        self.episode().pose
    }

    pub fn steps(&self) -> u32 {
        self.episode().steps
    }

    pub fn outcome(&self) -> Outcome {
        self.episode().outcome
    }

    /// Seconds elapsed since reset.
    pub fn sim_time(&self) -> f64 {
        self.episode().substeps as f64 * self.config.substep_dt()
    }

    pub fn world_time(&self) -> f64 {
        self.episode().time_offset + self.sim_time()
    }

    /// Start-to-goal distance at reset.
    pub fn initial_distance(&self) -> f64 {
        self.episode().d0
    }

    pub fn goal_rel(&self) -> [f64; 2] {
        relative_goal(&self.pose(), self.world.layout.goal)
    }

    pub fn observe(&self) -> Observation {
        let pose = self.pose();
        let snap = self.world.at_time(self.world_time());
        Observation {
            lidar: raycast(&pose, &snap, &self.config.lidar),
            goal_rel: relative_goal(&pose, self.world.layout.goal),
        }
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult, SimError> {
        let ev = self.advance(action)?;
        Ok(StepResult {
            observation: self.observe(),
            reward: ev.reward,
            cost: ev.cost,
            done: ev.outcome.is_terminal(),
            outcome: ev.outcome,
            sim_time: ev.sim_time,
        })
    }

    /// Same dynamics and events as [`Simulator::step`] but skips the scan.
    pub fn advance(&mut self, action: Action) -> Result<StepEvent, SimError> {
        let cfg = self.config;
        let world = Arc::clone(&self.world);
        let ep = self.episode.as_mut().ok_or(SimError::NotReset)?;
        if ep.outcome.is_terminal() {
            return Err(SimError::EpisodeOver(ep.outcome));
        }
        let a = cfg.action_bounds.clamp(action);
        let dt = cfg.substep_dt();
        let goal = world.layout.goal;
        let mut collided = false;
        let mut reached = false;
        for _ in 0..cfg.substeps {
            let p = ep.pose;
            let x = p.x + a.v * p.theta.cos() * dt;
            let y = p.y + a.v * p.theta.sin() * dt;
            ep.pose = RobotPose {
                x,
                y,
                theta: normalize_angle(p.theta + a.omega * dt),
            };
            ep.substeps += 1;
            let t = ep.time_offset + ep.substeps as f64 * dt;
            if collision_check(&ep.pose, &world.at_time(t), cfg.robot_radius) {
                collided = true;
                break;
            }
            if goal_distance(&ep.pose, goal) < cfg.goal_radius {
                reached = true;
                break;
            }
        }
        ep.steps += 1;
        let d_cur = goal_distance(&ep.pose, goal);
        let reward = compute_reward(&cfg.reward, ep.d_prev, d_cur, collided, reached);
        ep.d_prev = d_cur;
        ep.outcome = if collided {
            Outcome::Collision
        } else if reached {
            Outcome::Success
        } else if ep.steps >= cfg.max_steps {
            Outcome::Timeout
        } else {
            Outcome::Running
        };
        Ok(StepEvent {
            reward,
            cost: if collided { 1.0 } else { 0.0 },
            outcome: ep.outcome,
            sim_time: ep.substeps as f64 * dt,
        })
    }
}
