//! Procedural benchmark environments.
//!
//! Static worlds are 30×30 cellular-automaton grids filtered for
//! navigability; dynamic worlds are either boxes crossing a 13.5 m field or
//! two oscillating walls that open a gap on the start-goal line.

mod ca;
mod catalog;
mod dynamic;
mod grid;
mod io;
mod layout;

pub use ca::{ca_smooth_step, CellMatrix};
pub use catalog::{
    content_hash, env_id, generate_benchmark_set, generate_benchmark_set_with, load_catalog, load_manifest,
    save_catalog, Catalog, CatalogManifest, EnvSet, ManifestEntry, DYNAMIC_COUNT, MANIFEST_FILE, STATIC_COUNT,
    STATIC_PER_PARAM_SET, STATIC_TRAIN_SIZES, TEST_PER_KIND,
};
pub use dynamic::{
    generate_dynamic_box, generate_dynamic_wall, triangle_wave, BoxObstacle, DynamicBoxEnvSpec, DynamicWallEnvSpec,
    MovingWall, BOX_COUNT_RANGE, BOX_SIDE_RANGE, BOX_SPEED_RANGE, WALL_LENGTH_RANGE, WALL_SPEED_RANGE,
    WALL_TILT_RANGE,
};
pub use grid::{
    ca_grid, generate_static, generate_static_with, inflation_cells, is_navigable, CAParams, OccupancyGrid,
    StaticGenOptions, StaticGeneration, CATALOG_NAVIGABILITY_RADIUS, CELL_SIZE, DEFAULT_RETRY_BUDGET, DEFAULT_ROBOT_RADIUS, GRID_SIZE,
    INITIAL_FILLS, SMOOTHING_ITERATIONS,
};
pub use io::{load_env, save_env, ENV_FORMAT, ENV_VERSION};
pub use layout::{EnvKind, Field, Layout, BOX_FIELD_SIZE, PATH_LENGTH, SMALL_FIELD_SIZE};

use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvGenError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("grid must be 30x30, got {rows}x{cols}")]
    Dimensions { rows: usize, cols: usize },
    #[error("no navigable grid for {params:?} after {attempts} attempts")]
    GenerationFailed { params: CAParams, attempts: u32 },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("hash mismatch for {what}: expected {expected}, found {found}")]
    HashMismatch { what: String, expected: String, found: String },
    #[error("unknown environment set `{0}`")]
    UnknownSet(String),
    #[error("unknown environment `{0}`")]
    UnknownEnvironment(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl EnvGenError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticObstacles {
    pub grid: OccupancyGrid,
    pub params: CAParams,
    pub accepted_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Obstacles {
    Static(StaticObstacles),
    DynamicBox(DynamicBoxEnvSpec),
    DynamicWall(DynamicWallEnvSpec),
}

/// A complete navigation environment: obstacles plus start, goal and walls.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    pub id: String,
    pub layout: Layout,
    pub obstacles: Obstacles,
}

impl EnvironmentSpec {
    pub fn kind(&self) -> EnvKind {
        match self.obstacles {
            Obstacles::Static(_) => EnvKind::Static,
            Obstacles::DynamicBox(_) => EnvKind::DynamicBox,
            Obstacles::DynamicWall(_) => EnvKind::DynamicWall,
        }
    }

    pub fn static_grid(id: &str, grid: OccupancyGrid, params: CAParams, accepted_seed: u64) -> Self {
        Self {
            id: id.to_string(),
            layout: Layout::for_kind(EnvKind::Static),
            obstacles: Obstacles::Static(StaticObstacles {
                grid,
                params,
                accepted_seed,
            }),
        }
    }

    /// Static layout with an obstacle-free field.
    pub fn empty_field(id: &str) -> Self {
        Self::static_grid(id, OccupancyGrid::empty(), CAParams::new(0.0, 0, 0), 0)
    }

    pub fn dynamic_box(id: &str, spec: DynamicBoxEnvSpec) -> Self {
        Self {
            id: id.to_string(),
            layout: Layout::for_kind(EnvKind::DynamicBox),
            obstacles: Obstacles::DynamicBox(spec),
        }
    }

    pub fn dynamic_wall(id: &str, spec: DynamicWallEnvSpec) -> Self {
        Self {
            id: id.to_string(),
            layout: Layout::for_kind(EnvKind::DynamicWall),
            obstacles: Obstacles::DynamicWall(spec),
        }
    }
}

pub fn static_environment(id: &str, params: &CAParams) -> Result<EnvironmentSpec, EnvGenError> {
    static_environment_with(id, params, &StaticGenOptions::default())
}

pub fn static_environment_with(
    id: &str,
    params: &CAParams,
    options: &StaticGenOptions,
) -> Result<EnvironmentSpec, EnvGenError> {
    let generated = generate_static_with(params, options)?;
    Ok(EnvironmentSpec::static_grid(
        id,
        generated.grid,
        *params,
        generated.accepted_seed,
    ))
}
