//! Start, goal and boundary-wall placement around an obstacle field.
//!
//! The start-goal axis is the world +y axis through x = 0. The robot starts
//! 2.25 m before the near edge of a 4.5 m field and the goal sits 10 m ahead of
//! the start. Walls close off the start side (back wall plus two lateral walls
//! running through the field) so the field is the only way forward.

use crate::geom::{RobotPose, Segment, Vec2};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

pub const PATH_LENGTH: f64 = 10.0;
pub const SMALL_FIELD_SIZE: f64 = 4.5;
pub const BOX_FIELD_SIZE: f64 = 13.5;
pub const START_Y: f64 = -2.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    Static,
    DynamicBox,
    DynamicWall,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::Static, EnvKind::DynamicBox, EnvKind::DynamicWall];

    pub fn as_str(&self) -> &'static str {
        match self {
            EnvKind::Static => "static",
            EnvKind::DynamicBox => "dynamic-box",
            EnvKind::DynamicWall => "dynamic-wall",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Square obstacle field, given by its lower-left corner and side length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub min: Vec2,
    pub size: f64,
}

impl Field {
    pub fn max(&self) -> Vec2 {
        self.min + Vec2::new(self.size, self.size)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let max = self.max();
        p.x >= self.min.x && p.x <= max.x && p.y >= self.min.y && p.y <= max.y
    }

    pub fn center(&self) -> Vec2 {
        self.min + Vec2::new(self.size / 2.0, self.size / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub field: Field,
    pub start: RobotPose,
    pub goal: Vec2,
    pub boundary_walls: Vec<Segment>,
}

impl Layout {
    pub fn for_kind(kind: EnvKind) -> Self {
        let start = RobotPose::new(0.0, START_Y, FRAC_PI_2);
        let goal = Vec2::new(0.0, START_Y + PATH_LENGTH);
        match kind {
            EnvKind::Static | EnvKind::DynamicWall => {
                let h = SMALL_FIELD_SIZE / 2.0;
                let field = Field {
                    min: Vec2::new(-h, 0.0),
                    size: SMALL_FIELD_SIZE,
                };
                let back = -SMALL_FIELD_SIZE;
                let front = SMALL_FIELD_SIZE;
                Self {
                    field,
                    start,
                    goal,
                    boundary_walls: vec![
                        Segment::new(Vec2::new(-h, back), Vec2::new(-h, front)),
                        Segment::new(Vec2::new(h, back), Vec2::new(h, front)),
                        Segment::new(Vec2::new(-h, back), Vec2::new(h, back)),
                    ],
                }
            }
            EnvKind::DynamicBox => {
                // Centered on the midpoint of the start-goal path.
                let h = BOX_FIELD_SIZE / 2.0;
                let mid = START_Y + PATH_LENGTH / 2.0;
                let field = Field {
                    min: Vec2::new(-h, mid - h),
                    size: BOX_FIELD_SIZE,
                };
                let (lo, hi) = (mid - h, mid + h);
                Self {
                    field,
                    start,
                    goal,
                    boundary_walls: vec![
                        Segment::new(Vec2::new(-h, lo), Vec2::new(-h, hi)),
                        Segment::new(Vec2::new(h, lo), Vec2::new(h, hi)),
                        Segment::new(Vec2::new(-h, lo), Vec2::new(h, lo)),
                    ],
                }
            }
        }
    }

    pub fn path_length(&self) -> f64 {
        self.start.position().distance(self.goal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_goal_distance_is_ten_meters() {
        for kind in EnvKind::ALL {
            let l = Layout::for_kind(kind);
            assert!((l.path_length() - PATH_LENGTH).abs() < 1e-12);
            assert_eq!(l.boundary_walls.len(), 3);
        }
    }

    #[test]
    fn small_field_start_and_goal_on_opposite_sides() {
        let l = Layout::for_kind(EnvKind::Static);
        assert!(l.start.y < l.field.min.y);
        assert!(l.goal.y > l.field.max().y);
        assert!((l.field.min.y - l.start.y - 2.25).abs() < 1e-12);
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in EnvKind::ALL {
            assert_eq!(EnvKind::parse(kind.as_str()), Some(kind));
        }
        assert_eq!(EnvKind::parse("dynamic"), None);
    }
}
