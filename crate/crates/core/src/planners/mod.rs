//! Classical local planners.

mod dwa;

pub use dwa::{
    arc_poses, dwa_plan, dwa_scores, obstacle_points, score_arc, ArcScore, DWAConfig, DwaDecision, DwaPlanner,
};
