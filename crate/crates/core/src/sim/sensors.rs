//! Planar LiDAR, relative goal, and disc collision tests against a world snapshot.

use super::world::WorldSnapshot;
use crate::geom::{RobotPose, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    pub beams: usize,
    /// Total field of view, radians, centered on the heading.
    pub fov: f64,
    pub max_range: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            beams: 720,
            fov: 270f64.to_radians(),
            max_range: 5.0,
        }
    }
}

impl LidarConfig {
    /// Bearing of beam `k` relative to the heading; beam 0 is at −fov/2.
    pub fn beam_bearing(&self, k: usize) -> f64 {
        if self.beams <= 1 {
            return 0.0;
        }
        -self.fov / 2.0 + k as f64 * self.fov / (self.beams - 1) as f64
    }
}

/// Range along a single world-frame unit direction, capped at `max_range`.
pub fn cast_ray(origin: Vec2, dir: Vec2, world: &WorldSnapshot<'_>, max_range: f64) -> f64 {
    let mut best = max_range;
    if let Some(grid) = world.grid {
        if let Some(t) = grid.ray_intersect(origin, dir, best) {
            best = best.min(t);
        }
    }
    for r in &world.rects {
        if let Some(t) = r.ray_intersect(origin, dir) {
            best = best.min(t);
        }
    }
    for s in world.segments {
        if let Some(t) = s.ray_intersect(origin, dir) {
            best = best.min(t);
        }
    }
    best.max(0.0)
}

/// Full scan from `pose`; returns one range per beam.
pub fn raycast(pose: &RobotPose, world: &WorldSnapshot<'_>, config: &LidarConfig) -> Vec<f64> {
    let origin = pose.position();
    (0..config.beams)
        .map(|k| {
            let dir = Vec2::from_angle(pose.theta + config.beam_bearing(k));
            cast_ray(origin, dir, world, config.max_range)
        })
        .collect()
}

/// Goal position expressed in the robot frame.
pub fn relative_goal(pose: &RobotPose, goal: Vec2) -> [f64; 2] {
    let dx = goal.x - pose.x;
    let dy = goal.y - pose.y;
    let (s, c) = pose.theta.sin_cos();
    [c * dx + s * dy, -s * dx + c * dy]
}

/// Euclidean goal distance, computed from the robot-frame goal vector so that
/// it agrees bit-for-bit with distances recomputed from observations.
pub fn goal_distance(pose: &RobotPose, goal: Vec2) -> f64 {
    let [x, y] = relative_goal(pose, goal);
    x.hypot(y)
}

/// True iff the robot disc touches any obstacle (contact at exactly `radius` counts).
pub fn collision_check(pose: &RobotPose, world: &WorldSnapshot<'_>, radius: f64) -> bool {
    let p = pose.position();
    if let Some(grid) = world.grid {
        if grid.disc_intersects(p, radius) {
            return true;
        }
    }
    world.rects.iter().any(|r| r.distance_to(p) <= radius) || world.segments.iter().any(|s| s.distance_to(p) <= radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envgen::{CellMatrix, OccupancyGrid, GRID_SIZE};
    use crate::geom::{OrientedRect, Segment};
    use crate::sim::world::GridGeometry;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn empty_snapshot() -> WorldSnapshot<'static> {
        WorldSnapshot {
            grid: None,
            rects: vec![],
            segments: &[],
        }
    }

    #[test]
    fn empty_world_reads_max_range() {
        let scan = raycast(&RobotPose::new(0.0, 0.0, 0.3), &empty_snapshot(), &LidarConfig::default());
        assert_eq!(scan.len(), 720);
        assert!(scan.iter().all(|&r| r == 5.0));
    }

    #[test]
    fn beam_layout_spans_270_degrees() {
        let cfg = LidarConfig::default();
        assert_abs_diff_eq!(cfg.beam_bearing(0), -135f64.to_radians(), epsilon = 1e-12);
        assert_abs_diff_eq!(cfg.beam_bearing(719), 135f64.to_radians(), epsilon = 1e-12);
    }

    #[test]
    fn wall_ahead_plane_intersection() {
        // Infinite wall 2 m ahead of a robot facing +x.
        let wall = [Segment::new(Vec2::new(2.0, -1e3), Vec2::new(2.0, 1e3))];
        let snap = WorldSnapshot {
            grid: None,
            rects: vec![],
            segments: &wall,
        };
        let o = Vec2::ZERO;
        assert_abs_diff_eq!(cast_ray(o, Vec2::from_angle(0.0), &snap, 5.0), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cast_ray(o, Vec2::from_angle(PI / 3.0), &snap, 5.0), 4.0, epsilon = 1e-9);
        // Beyond the cap.
        assert_eq!(cast_ray(o, Vec2::from_angle(1.3), &snap, 5.0), 5.0);
    }

    #[test]
    fn relative_goal_examples() {
        assert_eq!(relative_goal(&RobotPose::new(0.0, 0.0, 0.0), Vec2::new(1.0, 0.0)), [1.0, 0.0]);
        let [x, y] = relative_goal(&RobotPose::new(0.0, 0.0, FRAC_PI_2), Vec2::new(0.0, 1.0));
        assert_abs_diff_eq!(x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y, 0.0, epsilon = 1e-15);
        assert_eq!(relative_goal(&RobotPose::new(3.0, -2.0, 1.0), Vec2::new(3.0, -2.0)), [0.0, 0.0]);
    }

    fn corridor(width_cells: usize) -> GridGeometry {
        // Vertical corridor of free columns centered in the grid.
        let mut m = CellMatrix::new(GRID_SIZE, GRID_SIZE);
        let first = (GRID_SIZE - width_cells) / 2;
        for r in 0..GRID_SIZE {
            for c in 0..GRID_SIZE {
                if c < first || c >= first + width_cells {
                    m.set(r, c, true);
                }
            }
        }
        GridGeometry::from_grid(&OccupancyGrid::from_cells(m, 0.15).unwrap(), Vec2::ZERO)
    }

    #[test]
    fn corridor_collision_cases() {
        let g = corridor(4);
        let snap = WorldSnapshot {
            grid: Some(&g),
            rects: vec![],
            segments: &[],
        };
        // Centered in a 0.6 m corridor: wall faces exactly 0.3 m away → closed contact.
        let center = RobotPose::new(15.0 * 0.15, 2.0, 0.0);
        assert!(collision_check(&center, &snap, 0.3));
        assert!(!collision_check(&center, &snap, 0.29));
        let g6 = corridor(6);
        let snap6 = WorldSnapshot {
            grid: Some(&g6),
            rects: vec![],
            segments: &[],
        };
        assert!(!collision_check(&center, &snap6, 0.3));
        // Centre inside an obstacle cell.
        assert!(collision_check(&RobotPose::new(0.05, 0.05, 0.0), &snap6, 0.0));
    }

    #[test]
    fn closed_contact_with_box_face() {
        let rect = OrientedRect::new(Vec2::new(1.0, 0.0), Vec2::new(0.2, 0.2), 0.0);
        let snap = WorldSnapshot {
            grid: None,
            rects: vec![rect],
            segments: &[],
        };
        assert!(collision_check(&RobotPose::new(0.5, 0.0, 0.0), &snap, 0.3));
        assert!(!collision_check(&RobotPose::new(0.5 - 1e-9, 0.0, 0.0), &snap, 0.3));
    }
}
