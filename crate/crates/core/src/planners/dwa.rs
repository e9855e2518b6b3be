//! Dynamic Window Approach over LiDAR endpoints.

use crate::geom::{normalize_angle, Vec2};
use crate::sim::{Action, ActionBounds, LidarConfig, Observation};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DWAConfig {
    pub v_samples: usize,
    pub omega_samples: usize,
    pub accel_v: f64,
    pub accel_omega: f64,
    pub horizon: f64,
    /// Integration step for arc prediction.
    pub arc_dt: f64,
    pub control_dt: f64,
    pub w_heading: f64,
    pub w_clearance: f64,
    pub w_velocity: f64,
    /// Free path length (m) at which the clearance score saturates.
    pub clearance_cutoff: f64,
    pub robot_radius: f64,
    pub bounds: ActionBounds,
    pub lidar: LidarConfig,
}

impl Default for DWAConfig {
    fn default() -> Self {
        Self {
            v_samples: 11,
            omega_samples: 21,
            accel_v: 2.0,
            accel_omega: 6.0,
            horizon: 1.5,
            arc_dt: 0.1,
            control_dt: 0.2,
            w_heading: 1.0,
            w_clearance: 2.0,
            w_velocity: 0.5,
            clearance_cutoff: 1.5,
            robot_radius: 0.3,
            bounds: ActionBounds::default(),
            lidar: LidarConfig::default(),
        }
    }
}

impl DWAConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.v_samples < 2 || self.omega_samples < 2 {
            return Err("DWA needs at least 2 samples per axis".into());
        }
        if !(self.horizon > self.control_dt) {
            return Err(format!(
                "DWA horizon {} must exceed the control period {}",
                self.horizon, self.control_dt
            ));
        }
        if !(self.arc_dt > 0.0) || !(self.clearance_cutoff > 0.0) {
            return Err("arc_dt and clearance_cutoff must be positive".into());
        }
        if [self.w_heading, self.w_clearance, self.w_velocity, self.accel_v, self.accel_omega]
            .iter()
            .any(|w| !(*w >= 0.0))
        {
            return Err("DWA weights and acceleration limits must be non-negative".into());
        }
        Ok(())
    }

    /// Reachable `(v, ω)` ranges within one control period of `current`.
    pub fn window(&self, current: Action) -> ([f64; 2], [f64; 2]) {
        let b = &self.bounds;
        let dv = self.accel_v * self.control_dt;
        let dw = self.accel_omega * self.control_dt;
        let c = b.clamp(current);
        (
            [(c.v - dv).max(b.v_min), (c.v + dv).min(b.v_max)],
            [(c.omega - dw).max(-b.omega_max), (c.omega + dw).min(b.omega_max)],
        )
    }

    /// The velocity grid of the window, v-major.
    pub fn candidates(&self, current: Action) -> Vec<Action> {
        let (vr, wr) = self.window(current);
        let vs = spaced(vr, self.v_samples);
        let ws = spaced(wr, self.omega_samples);
        vs.iter().flat_map(|&v| ws.iter().map(move |&omega| Action { v, omega })).collect()
    }
}

/// `n` evenly spaced values over `[lo, hi]`, computed about the midpoint so a
/// range symmetric about zero samples zero exactly.
fn spaced([lo, hi]: [f64; 2], n: usize) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    (0..n)
        .map(|i| mid + half * (2.0 * i as f64 / (n - 1) as f64 - 1.0))
        .collect()
}

/// Obstacle points in the robot frame, one per beam that returned before the cap.
pub fn obstacle_points(obs: &Observation, lidar: &LidarConfig) -> Vec<Vec2> {
    obs.lidar
        .iter()
        .enumerate()
        .filter(|(_, &r)| r < lidar.max_range)
        .map(|(k, &r)| Vec2::from_angle(lidar.beam_bearing(k)) * r)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcScore {
    pub action: Action,
    /// Smallest centre-to-obstacle distance along the arc. Points farther than
    /// `robot_radius` from every pose may be skipped, so values above the
    /// radius are only lower bounds of the farthest skipped point.
    pub clearance: f64,
    /// Distance the robot can travel along the arc's curvature before contact,
    /// capped at `clearance_cutoff`.
    pub free_path: f64,
    pub heading: f64,
    pub admissible: bool,
    pub score: f64,
}

/// Robot-frame poses along a constant-velocity arc, excluding the start.
pub fn arc_poses(a: Action, cfg: &DWAConfig) -> Vec<(Vec2, f64)> {
    let n = (cfg.horizon / cfg.arc_dt).round().max(1.0) as usize;
    let dt = cfg.horizon / n as f64;
    let (mut x, mut y, mut th) = (0.0, 0.0, 0.0f64);
    (0..n)
        .map(|_| {
            x += a.v * th.cos() * dt;
            y += a.v * th.sin() * dt;
            th += a.omega * dt;
            (Vec2::new(x, y), th)
        })
        .collect()
}

const PATH_STEP: f64 = 0.05;

/// Point on the circle of curvature `k` after arc length `s` from the origin.
fn curve_point(k: f64, s: f64) -> Vec2 {
    if k.abs() < 1e-9 {
        Vec2::new(s, 0.0)
    } else {
        Vec2::new((k * s).sin() / k, (1.0 - (k * s).cos()) / k)
    }
}

/// Free travel along the curvature of `a` up to `cfg.clearance_cutoff`. A
/// turn in place is measured along the ray it faces at the end of the horizon.
pub fn free_path_length(a: Action, points: &[Vec2], cfg: &DWAConfig) -> f64 {
    let cap = cfg.clearance_cutoff;
    let (k, facing) = if a.v > 0.0 {
        (a.omega / a.v, Vec2::new(1.0, 0.0))
    } else {
        (0.0, Vec2::from_angle(a.omega * cfg.horizon))
    };
    let r2 = cfg.robot_radius * cfg.robot_radius;
    let n = (cap / PATH_STEP).ceil() as usize;
    for i in 0..=n {
        let s = (i as f64 * PATH_STEP).min(cap);
        let c = curve_point(k, s);
        let p = Vec2::new(facing.x * c.x - facing.y * c.y, facing.y * c.x + facing.x * c.y);
        if points.iter().any(|&q| {
            let d = q - p;
            d.x * d.x + d.y * d.y < r2
        }) {
            return (s - PATH_STEP).max(0.0);
        }
    }
    cap
}

pub fn score_arc(a: Action, points: &[Vec2], goal_rel: [f64; 2], cfg: &DWAConfig) -> ArcScore {
    let poses = arc_poses(a, cfg);
    let reach = a.v.abs() * cfg.horizon + cfg.robot_radius;
    let mut clearance = f64::INFINITY;
    for &q in points.iter().filter(|q| q.norm() <= reach) {
        for &(p, _) in &poses {
            clearance = clearance.min((q - p).norm());
        }
    }
    let path_reach = cfg.clearance_cutoff + cfg.robot_radius;
    let near: Vec<Vec2> = points.iter().copied().filter(|q| q.norm() <= path_reach).collect();
    let free_path = free_path_length(a, &near, cfg);
    let (end, th) = *poses.last().expect("at least one arc pose");
    let to_goal = Vec2::new(goal_rel[0], goal_rel[1]) - end;
    let bearing_err = normalize_angle(to_goal.y.atan2(to_goal.x) - th);
    let heading = 1.0 - bearing_err.abs() / PI;
    let clear_score = free_path.min(cfg.clearance_cutoff) / cfg.clearance_cutoff;
    let v_norm = if cfg.bounds.v_max > 0.0 { a.v / cfg.bounds.v_max } else { 0.0 };
    ArcScore {
        action: a,
        clearance,
        free_path,
        heading,
        admissible: clearance >= cfg.robot_radius,
        score: cfg.w_heading * heading + cfg.w_clearance * clear_score + cfg.w_velocity * v_norm,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwaDecision {
    pub action: Action,
    pub trapped: bool,
    pub score: Option<f64>,
}

/// True if `a` should replace the incumbent `b`: higher score, then larger v,
/// then smaller |ω|.
fn better(a: &ArcScore, b: &ArcScore) -> bool {
    if a.score != b.score {
        return a.score > b.score;
    }
    if a.action.v != b.action.v {
        return a.action.v > b.action.v;
    }
    a.action.omega.abs() < b.action.omega.abs()
}

/// Scores every candidate in the dynamic window.
pub fn dwa_scores(obs: &Observation, current: Action, cfg: &DWAConfig) -> Vec<ArcScore> {
    let points = obstacle_points(obs, &cfg.lidar);
    cfg.candidates(current)
        .into_iter()
        .map(|a| score_arc(a, &points, obs.goal_rel, cfg))
        .collect()
}

pub fn dwa_plan(obs: &Observation, current: Action, cfg: &DWAConfig) -> DwaDecision {
    let scores = dwa_scores(obs, current, cfg);
    let mut best: Option<&ArcScore> = None;
    for s in scores.iter().filter(|s| s.admissible) {
        if best.map_or(true, |b| better(s, b)) {
            best = Some(s);
        }
    }
    match best {
        Some(b) => DwaDecision {
            action: b.action,
            trapped: false,
            score: Some(b.score),
        },
        None => {
            let bearing = obs.goal_rel[1].atan2(obs.goal_rel[0]);
            let w = cfg.bounds.omega_max;
            DwaDecision {
                action: Action {
                    v: 0.0,
                    omega: (bearing / cfg.control_dt).clamp(-w, w),
                },
                trapped: true,
                score: None,
            }
        }
    }
}

/// Stateful wrapper that feeds the last command back as the current velocity.
#[derive(Debug, Clone)]
pub struct DwaPlanner {
    pub config: DWAConfig,
    last: Action,
    pub trapped_steps: usize,
}

impl DwaPlanner {
    pub fn new(config: DWAConfig) -> Self {
        Self {
            config,
            last: Action::default(),
            trapped_steps: 0,
        }
    }

    pub fn reset(&mut self) {
        self.last = Action::default();
        self.trapped_steps = 0;
    }

    pub fn act(&mut self, obs: &Observation) -> Action {
        let d = dwa_plan(obs, self.last, &self.config);
        if d.trapped {
            self.trapped_steps += 1;
        }
        self.last = d.action;
        d.action
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_obs(goal_rel: [f64; 2]) -> Observation {
        Observation {
            lidar: vec![5.0; 720],
            goal_rel,
        }
    }

    /// Robot-frame ranges for an infinite wall `dist` ahead.
    fn wall_obs(dist: f64) -> Observation {
        let lidar = LidarConfig::default();
        let ranges = (0..lidar.beams)
            .map(|k| {
                let c = lidar.beam_bearing(k).cos();
                if c > 1e-9 {
                    (dist / c).min(5.0)
                } else {
                    5.0
                }
            })
            .collect();
        Observation {
            lidar: ranges,
            goal_rel: [8.0, 0.0],
        }
    }

    #[test]
    fn window_symmetric_grid_contains_zero_turn() {
        let cfg = DWAConfig::default();
        let c = cfg.candidates(Action::default());
        assert_eq!(c.len(), 11 * 21);
        assert!(c.iter().any(|a| a.omega == 0.0 && a.v == 0.4));
    }

    #[test]
    fn empty_world_converges_to_full_speed_straight() {
        let cfg = DWAConfig::default();
        let mut planner = DwaPlanner::new(cfg);
        let obs = free_obs([10.0, 0.0]);
        let mut a = Action::default();
        for _ in 0..10 {
            a = planner.act(&obs);
        }
        assert_eq!(a, Action::new(2.0, 0.0));
    }

    #[test]
    fn wall_ahead_at_full_speed_reduces_velocity() {
        let cfg = DWAConfig::default();
        let obs = wall_obs(0.5);
        let current = Action::new(2.0, 0.0);
        let d = dwa_plan(&obs, current, &cfg);
        assert!(d.action.v < 2.0);
        // Exhaustive oracle: no forward arc reachable from full speed clears the wall.
        let points = obstacle_points(&obs, &cfg.lidar);
        for a in cfg.candidates(current) {
            let pts = arc_poses(a, &cfg);
            let min_d = pts
                .iter()
                .flat_map(|(p, _)| points.iter().map(move |q| (*q - *p).norm()))
                .fold(f64::INFINITY, f64::min);
            assert!(min_d < cfg.robot_radius, "arc {a:?} should be inadmissible");
        }
        assert!(d.trapped);
    }

    #[test]
    fn goal_behind_prefers_turning() {
        let cfg = DWAConfig::default();
        let obs = free_obs([-5.0, 0.1]);
        let d = dwa_plan(&obs, Action::default(), &cfg);
        let (_, wr) = cfg.window(Action::default());
        assert_eq!(d.action.omega, wr[1]);
        // Re-scoring: the returned action attains the maximum.
        let best = dwa_scores(&obs, Action::default(), &cfg)
            .iter()
            .filter(|s| s.admissible)
            .map(|s| s.score)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(d.score, Some(best));
    }

    #[test]
    fn deterministic() {
        let cfg = DWAConfig::default();
        let obs = wall_obs(1.7);
        assert_eq!(
            dwa_plan(&obs, Action::new(1.0, 0.5), &cfg),
            dwa_plan(&obs, Action::new(1.0, 0.5), &cfg)
        );
    }

    #[test]
    fn free_path_stops_at_first_contact() {
        let cfg = DWAConfig::default();
        let pts = [Vec2::new(1.0, 0.0)];
        let straight = free_path_length(Action::new(1.0, 0.0), &pts, &cfg);
        // Contact when the centre comes within the radius: s > 0.7.
        assert!(straight <= 0.7 && straight > 0.7 - 2.0 * PATH_STEP, "{straight}");
        // A turn in place facing away from the point sees nothing.
        let away = Action::new(0.0, PI / cfg.horizon);
        assert_eq!(free_path_length(away, &pts, &cfg), cfg.clearance_cutoff);
        assert_eq!(free_path_length(Action::default(), &pts, &cfg), straight);
    }

    #[test]
    fn blocked_ahead_turns_instead_of_waiting() {
        let cfg = DWAConfig::default();
        let d = dwa_plan(&wall_obs(0.45), Action::default(), &cfg);
        assert!(!d.trapped);
        assert!(d.action.omega != 0.0, "{:?}", d.action);
    }
}
