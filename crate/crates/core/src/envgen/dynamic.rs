//! Dynamic obstacle worlds: boxes crossing a large field and a pair of
//! oscillating walls that periodically open a gap on the start-goal line.

use super::layout::{EnvKind, Field, Layout};
use crate::geom::{OrientedRect, Vec2};
use crate::seed::rng_from_seed;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

pub const BOX_SIDE_RANGE: (f64, f64) = (0.1, 0.5);
pub const BOX_HEIGHT: f64 = 1.0;
pub const BOX_SPEED_RANGE: (f64, f64) = (1.0, 1.5);
pub const BOX_COUNT_RANGE: (usize, usize) = (10, 15);

pub const WALL_LENGTH_RANGE: (f64, f64) = (3.5, 4.5);
pub const WALL_TILT_RANGE: (f64, f64) = (-10.0 * PI / 180.0, 10.0 * PI / 180.0);
pub const WALL_SPEED_RANGE: (f64, f64) = (1.0, 1.4);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxObstacle {
    pub width: f64,
    pub length: f64,
    pub height: f64,
    pub start_position: Vec2,
    /// Direction of travel, radians.
    pub heading: f64,
    /// Fixed body orientation, radians.
    pub orientation: f64,
    pub speed: f64,
}

impl BoxObstacle {
    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.heading) * self.speed
    }

    /// Time for the box center to leave `field` after starting on its edge.
    pub fn exit_period(&self, field: &Field) -> f64 {
        let v = self.velocity();
        let p = self.start_position;
        let max = field.max();
        let mut t = f64::INFINITY;
        if v.x > 0.0 {
            t = t.min((max.x - p.x) / v.x);
        } else if v.x < 0.0 {
            t = t.min((field.min.x - p.x) / v.x);
        }
        if v.y > 0.0 {
            t = t.min((max.y - p.y) / v.y);
        } else if v.y < 0.0 {
            t = t.min((field.min.y - p.y) / v.y);
        }
        t
    }

    /// Position at time `t`; the motion restarts from the start point every exit period.
    pub fn position_at(&self, field: &Field, t: f64) -> Vec2 {
        let period = self.exit_period(field);
        let local = if period.is_finite() && period > 0.0 {
            t.rem_euclid(period)
        } else {
            t
        };
        self.start_position + self.velocity() * local
    }

    pub fn footprint_at(&self, field: &Field, t: f64) -> OrientedRect {
        OrientedRect::new(
            self.position_at(field, t),
            Vec2::new(self.width / 2.0, self.length / 2.0),
            self.orientation,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicBoxEnvSpec {
    pub field: Field,
    pub boxes: Vec<BoxObstacle>,
    pub seed: u64,
}

/// Samples 10–15 boxes that start on the left field edge (x = min) and head
/// into the field.
pub fn generate_dynamic_box(seed: u64) -> DynamicBoxEnvSpec {
    let field = Layout::for_kind(EnvKind::DynamicBox).field;
    let mut rng = rng_from_seed(seed);
    let count = rng.gen_range(BOX_COUNT_RANGE.0..=BOX_COUNT_RANGE.1);
    let boxes = (0..count)
        .map(|_| {
            let width = rng.gen_range(BOX_SIDE_RANGE.0..=BOX_SIDE_RANGE.1);
            let length = rng.gen_range(BOX_SIDE_RANGE.0..=BOX_SIDE_RANGE.1);
            let speed = rng.gen_range(BOX_SPEED_RANGE.0..=BOX_SPEED_RANGE.1);
            let y = field.min.y + rng.gen_range(0.0..=field.size);
            // Open interval keeps the inward (+x) component strictly positive.
            let mut heading = rng.gen_range(-FRAC_PI_2..FRAC_PI_2);
            if heading <= -FRAC_PI_2 {
                heading = 0.0;
            }
            let orientation = rng.gen_range(0.0..2.0 * PI);
            BoxObstacle {
                width,
                length,
                height: BOX_HEIGHT,
                start_position: Vec2::new(field.min.x, y),
                heading,
                orientation,
                speed,
            }
        })
        .collect();
    DynamicBoxEnvSpec { field, boxes, seed }
}

/// Unit triangle wave of period 4: 0 at u = 0, rising with slope 1 to 1 at
/// u = 1, back through 0 at u = 2 to −1 at u = 3.
pub fn triangle_wave(u: f64) -> f64 {
    1.0 - ((u + 1.0).rem_euclid(4.0) - 2.0).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingWall {
    pub length: f64,
    /// Rotation relative to the axis perpendicular to the start-goal line.
    pub tilt: f64,
    pub speed: f64,
    /// +1 or −1 along the lateral axis.
    pub direction: i8,
    /// Half-range of the oscillation.
    pub travel_extent: f64,
}

impl MovingWall {
    /// Signed lateral offset after `t` seconds with shared phase `phase0`.
    pub fn offset_at(&self, t: f64, phase0: f64) -> f64 {
        self.travel_extent * triangle_wave(self.speed * t / self.travel_extent + phase0)
    }

    pub fn period(&self) -> f64 {
        4.0 * self.travel_extent / self.speed
    }
}

/// Two walls lying on the line `y = crossing_y`. Wall 0 extends toward +x from
/// its inner end, wall 1 toward −x; inner end `i` sits at
/// `direction_i · offset_i(t)`, so the gap between them is
/// `direction_0 · (offset_0 + offset_1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicWallEnvSpec {
    pub field: Field,
    pub crossing_y: f64,
    pub walls: [MovingWall; 2],
    /// Shared initial phase of the triangle wave, in [0, 4).
    pub phase0: f64,
    pub seed: u64,
}

impl DynamicWallEnvSpec {
    pub fn inner_ends_at(&self, t: f64) -> [f64; 2] {
        [0, 1].map(|i| f64::from(self.walls[i].direction) * self.walls[i].offset_at(t, self.phase0))
    }

    /// Width of the opening on the crossing line (negative when the walls overlap).
    pub fn gap_at(&self, t: f64) -> f64 {
        let [e0, e1] = self.inner_ends_at(t);
        e0 - e1
    }

    pub fn footprints_at(&self, t: f64, thickness: f64) -> [OrientedRect; 2] {
        let ends = self.inner_ends_at(t);
        [0, 1].map(|i| {
            let w = &self.walls[i];
            let axis = Vec2::from_angle(w.tilt);
            let sign = if i == 0 { 1.0 } else { -1.0 };
            let inner = Vec2::new(ends[i], self.crossing_y);
            OrientedRect::new(
                inner + axis * (sign * w.length / 2.0),
                Vec2::new(w.length / 2.0, thickness / 2.0),
                w.tilt,
            )
        })
    }

    /// Longest wall period; the joint motion is not periodic in general.
    pub fn max_period(&self) -> f64 {
        self.walls.iter().map(MovingWall::period).fold(0.0, f64::max)
    }
}

pub fn generate_dynamic_wall(seed: u64) -> DynamicWallEnvSpec {
    let field = Layout::for_kind(EnvKind::DynamicWall).field;
    let mut rng = rng_from_seed(seed);
    let first_direction: i8 = if rng.gen_bool(0.5) { 1 } else { -1 };
    let travel_extent = field.size / 2.0;
    let mut sample_wall = |direction: i8| MovingWall {
        length: rng.gen_range(WALL_LENGTH_RANGE.0..=WALL_LENGTH_RANGE.1),
        tilt: rng.gen_range(WALL_TILT_RANGE.0..=WALL_TILT_RANGE.1),
        speed: rng.gen_range(WALL_SPEED_RANGE.0..=WALL_SPEED_RANGE.1),
        direction,
        travel_extent,
    };
    let walls = [sample_wall(first_direction), sample_wall(-first_direction)];
    let phase0 = rng.gen_range(0.0..4.0);
    DynamicWallEnvSpec {
        field,
        crossing_y: field.center().y,
        walls,
        phase0,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn box_generation_is_deterministic() {
        assert_eq!(generate_dynamic_box(99), generate_dynamic_box(99));
        assert_ne!(generate_dynamic_box(99), generate_dynamic_box(100));
    }

    #[test]
    fn sampled_ranges_hold_over_many_seeds() {
        let mut violations = 0;
        for seed in 0..10_000u64 {
            let spec = generate_dynamic_box(seed);
            if !(10..=15).contains(&spec.boxes.len()) {
                violations += 1;
            }
            for b in &spec.boxes {
                let ok = (0.1..=0.5).contains(&b.width)
                    && (0.1..=0.5).contains(&b.length)
                    && (1.0..=1.5).contains(&b.speed)
                    && b.heading.cos() > 0.0
                    && b.start_position.x == spec.field.min.x
                    && (spec.field.min.y..=spec.field.max().y).contains(&b.start_position.y);
                if !ok {
                    violations += 1;
                }
            }
            let wall = generate_dynamic_wall(seed);
            for w in &wall.walls {
                let ok = (3.5..=4.5).contains(&w.length)
                    && w.tilt.abs() <= 10f64.to_radians() + 1e-12
                    && (1.0..=1.4).contains(&w.speed);
                if !ok {
                    violations += 1;
                }
            }
            if wall.walls[0].direction != -wall.walls[1].direction {
                violations += 1;
            }
        }
        assert_eq!(violations, 0);
    }

    #[test]
    fn box_leaves_field_and_restarts() {
        let spec = generate_dynamic_box(3);
        let diag = spec.field.size * 2f64.sqrt();
        for b in &spec.boxes {
            let period = b.exit_period(&spec.field);
            assert!(period <= diag / b.speed + 1e-9);
            // Closed-form straight-line motion until the exit.
            let just_before = period - 1e-6;
            let expected = b.start_position + b.velocity() * just_before;
            assert_abs_diff_eq!(b.position_at(&spec.field, just_before).x, expected.x, epsilon = 1e-9);
            assert!(spec.field.contains(b.position_at(&spec.field, just_before)));
            let exit_point = b.start_position + b.velocity() * period;
            let max = spec.field.max();
            let on_boundary = (exit_point.x - max.x).abs() < 1e-9
                || (exit_point.y - max.y).abs() < 1e-9
                || (exit_point.y - spec.field.min.y).abs() < 1e-9;
            assert!(on_boundary);
            let restarted = b.position_at(&spec.field, diag / b.speed);
            let local = (diag / b.speed).rem_euclid(period);
            assert_abs_diff_eq!(restarted.y, (b.start_position + b.velocity() * local).y, epsilon = 1e-9);
            let again = b.position_at(&spec.field, period + 0.3);
            let first = b.position_at(&spec.field, 0.3);
            assert_abs_diff_eq!(again.x, first.x, epsilon = 1e-9);
            assert_abs_diff_eq!(again.y, first.y, epsilon = 1e-9);
        }
    }

    #[test]
    fn triangle_wave_values() {
        for (u, v) in [(0.0, 0.0), (0.5, 0.5), (1.0, 1.0), (2.0, 0.0), (3.0, -1.0), (4.0, 0.0), (-1.0, -1.0)] {
            assert_abs_diff_eq!(triangle_wave(u), v, epsilon = 1e-12);
        }
    }

    #[test]
    fn wall_generation_is_deterministic() {
        assert_eq!(generate_dynamic_wall(5), generate_dynamic_wall(5));
    }

    #[test]
    fn wall_offset_moves_at_wall_speed() {
        let spec = generate_dynamic_wall(12);
        let w = &spec.walls[0];
        let quarter = w.period() / 4.0;
        let start = w.offset_at(0.0, spec.phase0);
        let later = w.offset_at(quarter, spec.phase0);
        // A quarter period moves the wave by exactly one unit of phase.
        assert_abs_diff_eq!(later, w.travel_extent * triangle_wave(1.0 + spec.phase0), epsilon = 1e-9);
        assert!((later - start).abs() <= w.speed * quarter + 1e-9);
    }
}
