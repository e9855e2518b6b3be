//! Navigation benchmark suite: procedural obstacle worlds, a planar
//! differential-drive simulator with LiDAR, a DWA baseline, and TD3-based
//! learners with history windows, Lagrangian shaping, learned dynamics
//! (Dyna and random-shooting MPC) and multi-environment training.

pub mod bench;
pub mod envgen;
pub mod geom;
pub mod nn;
pub mod planners;
pub mod rl;
pub mod seed;
pub mod sim;
