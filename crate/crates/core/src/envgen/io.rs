//! JSON environment files.
//!
//! ```json
//! {
//!   "format": "barnbench-env", "version": 1, "id": "static-000", "kind": "static",
//!   "field": {"min": {"x": -2.25, "y": 0.0}, "size": 4.5},
//!   "start": {"x": 0.0, "y": -2.25, "theta": 1.5707963267948966},
//!   "goal": {"x": 0.0, "y": 7.75},
//!   "boundary_walls": [{"a": {"x": ..., "y": ...}, "b": {...}}, ...],
//!   "static": {"cell_size": 0.15, "params": {...}, "accepted_seed": 42,
//!              "grid": ["000111...", ... 30 rows of 30 characters]}
//! }
//! ```
//!
//! Dynamic kinds carry a `dynamic_box` (`seed`, `boxes`) or `dynamic_wall`
//! (`seed`, `crossing_y`, `phase0`, `walls`) section instead of `static`.

use super::ca::CellMatrix;
use super::dynamic::{BoxObstacle, DynamicBoxEnvSpec, DynamicWallEnvSpec, MovingWall};
use super::grid::{CAParams, OccupancyGrid, GRID_SIZE};
use super::layout::{EnvKind, Field, Layout};
use super::{EnvGenError, EnvironmentSpec, Obstacles, StaticObstacles};
use crate::geom::{RobotPose, Segment, Vec2};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const ENV_FORMAT: &str = "barnbench-env";
pub const ENV_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvFile {
    format: String,
    version: u32,
    id: String,
    kind: EnvKind,
    field: Field,
    start: RobotPose,
    goal: Vec2,
    boundary_walls: Vec<Segment>,
    #[serde(rename = "static", default, skip_serializing_if = "Option::is_none")]
    static_section: Option<StaticSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dynamic_box: Option<BoxSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dynamic_wall: Option<WallSection>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StaticSection {
    cell_size: f64,
    params: CAParams,
    accepted_seed: u64,
    grid: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxSection {
    seed: u64,
    boxes: Vec<BoxObstacle>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WallSection {
    seed: u64,
    crossing_y: f64,
    phase0: f64,
    walls: Vec<MovingWall>,
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> EnvGenError {
    EnvGenError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

fn check_finite(field: &str, values: &[f64]) -> Result<(), EnvGenError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(field, "non-finite number"))
    }
}

fn parse_grid(rows: &[String], cell_size: f64) -> Result<OccupancyGrid, EnvGenError> {
    if rows.len() != GRID_SIZE {
        return Err(invalid(
            "static.grid",
            format!("expected {GRID_SIZE} rows, found {}", rows.len()),
        ));
    }
    let mut parsed = Vec::with_capacity(GRID_SIZE);
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<bool> = row
            .chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(invalid(
                    format!("static.grid[{i}]"),
                    format!("unexpected character {other:?}"),
                )),
            })
            .collect::<Result<_, _>>()?;
        if cells.len() != GRID_SIZE {
            return Err(invalid(
                format!("static.grid[{i}]"),
                format!("expected {GRID_SIZE} cells, found {}", cells.len()),
            ));
        }
        parsed.push(cells);
    }
    let matrix = CellMatrix::from_rows(&parsed).expect("rows checked above");
    OccupancyGrid::from_cells(matrix, cell_size)
}

impl EnvFile {
    fn from_spec(spec: &EnvironmentSpec) -> Self {
        let mut file = EnvFile {
            format: ENV_FORMAT.to_string(),
            version: ENV_VERSION,
            id: spec.id.clone(),
            kind: spec.kind(),
            field: spec.layout.field,
            start: spec.layout.start,
            goal: spec.layout.goal,
            boundary_walls: spec.layout.boundary_walls.clone(),
            static_section: None,
            dynamic_box: None,
            dynamic_wall: None,
        };
        match &spec.obstacles {
            Obstacles::Static(s) => {
                file.static_section = Some(StaticSection {
                    cell_size: s.grid.cell_size(),
                    params: s.params,
                    accepted_seed: s.accepted_seed,
                    grid: s.grid.to_row_strings(),
                })
            }
            Obstacles::DynamicBox(b) => {
                file.dynamic_box = Some(BoxSection {
                    seed: b.seed,
                    boxes: b.boxes.clone(),
                })
            }
            Obstacles::DynamicWall(w) => {
                file.dynamic_wall = Some(WallSection {
                    seed: w.seed,
                    crossing_y: w.crossing_y,
                    phase0: w.phase0,
                    walls: w.walls.to_vec(),
                })
            }
        }
        file
    }

    fn into_spec(self) -> Result<EnvironmentSpec, EnvGenError> {
        if self.format != ENV_FORMAT {
            return Err(invalid("format", format!("expected {ENV_FORMAT:?}, found {:?}", self.format)));
        }
        if self.version != ENV_VERSION {
            return Err(invalid("version", format!("unsupported version {}", self.version)));
        }
        if self.id.is_empty() {
            return Err(invalid("id", "empty identifier"));
        }
        check_finite("field", &[self.field.min.x, self.field.min.y, self.field.size])?;
        if self.field.size <= 0.0 {
            return Err(invalid("field.size", "must be positive"));
        }
        check_finite("start", &[self.start.x, self.start.y, self.start.theta])?;
        check_finite("goal", &[self.goal.x, self.goal.y])?;
        for (i, w) in self.boundary_walls.iter().enumerate() {
            check_finite(&format!("boundary_walls[{i}]"), &[w.a.x, w.a.y, w.b.x, w.b.y])?;
        }
        let sections = [
            self.static_section.is_some(),
            self.dynamic_box.is_some(),
            self.dynamic_wall.is_some(),
        ];
        if sections.iter().filter(|&&s| s).count() != 1 {
            return Err(invalid("kind", "exactly one obstacle section must be present"));
        }
        let obstacles = match self.kind {
            EnvKind::Static => {
                let s = self
                    .static_section
                    .ok_or_else(|| invalid("static", "missing section for kind \"static\""))?;
                check_finite("static.cell_size", &[s.cell_size, s.params.initial_fill])?;
                if s.cell_size <= 0.0 {
                    return Err(invalid("static.cell_size", "must be positive"));
                }
                s.params.validate()?;
                Obstacles::Static(StaticObstacles {
                    grid: parse_grid(&s.grid, s.cell_size)?,
                    params: s.params,
                    accepted_seed: s.accepted_seed,
                })
            }
            EnvKind::DynamicBox => {
                let b = self
                    .dynamic_box
                    .ok_or_else(|| invalid("dynamic_box", "missing section for kind \"dynamic-box\""))?;
                for (i, bx) in b.boxes.iter().enumerate() {
                    let field = format!("dynamic_box.boxes[{i}]");
                    check_finite(
                        &field,
                        &[
                            bx.width,
                            bx.length,
                            bx.height,
                            bx.start_position.x,
                            bx.start_position.y,
                            bx.heading,
                            bx.orientation,
                            bx.speed,
                        ],
                    )?;
                    if bx.width <= 0.0 || bx.length <= 0.0 || bx.speed <= 0.0 {
                        return Err(invalid(field, "width, length and speed must be positive"));
                    }
                }
                Obstacles::DynamicBox(DynamicBoxEnvSpec {
                    field: self.field,
                    boxes: b.boxes,
                    seed: b.seed,
                })
            }
            EnvKind::DynamicWall => {
                let w = self
                    .dynamic_wall
                    .ok_or_else(|| invalid("dynamic_wall", "missing section for kind \"dynamic-wall\""))?;
                check_finite("dynamic_wall", &[w.crossing_y, w.phase0])?;
                let walls: [MovingWall; 2] = w.walls.try_into().map_err(|v: Vec<MovingWall>| {
                    invalid("dynamic_wall.walls", format!("expected 2 walls, found {}", v.len()))
                })?;
                for (i, wall) in walls.iter().enumerate() {
                    let field = format!("dynamic_wall.walls[{i}]");
                    check_finite(&field, &[wall.length, wall.tilt, wall.speed, wall.travel_extent])?;
                    if wall.length <= 0.0 || wall.speed <= 0.0 || wall.travel_extent <= 0.0 {
                        return Err(invalid(field, "length, speed and travel_extent must be positive"));
                    }
                    if wall.direction.abs() != 1 {
                        return Err(invalid(field, "direction must be +1 or -1"));
                    }
                }
                if walls[0].direction == walls[1].direction {
                    return Err(invalid("dynamic_wall.walls", "walls must move in opposite directions"));
                }
                Obstacles::DynamicWall(DynamicWallEnvSpec {
                    field: self.field,
                    crossing_y: w.crossing_y,
                    walls,
                    phase0: w.phase0,
                    seed: w.seed,
                })
            }
        };
        Ok(EnvironmentSpec {
            id: self.id,
            layout: Layout {
                field: self.field,
                start: self.start,
                goal: self.goal,
                boundary_walls: self.boundary_walls,
            },
            obstacles,
        })
    }
}

impl EnvironmentSpec {
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&EnvFile::from_spec(self)).expect("environment serializes");
        s.push('\n');
        s
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(EnvFile::from_spec(self)).expect("environment serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, EnvGenError> {
        let file: EnvFile = serde_json::from_str(text).map_err(|e| EnvGenError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        file.into_spec()
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self, EnvGenError> {
        let file: EnvFile = serde_json::from_value(value).map_err(|e| EnvGenError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        file.into_spec()
    }
}

pub fn save_env(path: &Path, spec: &EnvironmentSpec) -> Result<(), EnvGenError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| EnvGenError::io(parent, e))?;
    }
    fs::write(path, spec.to_json_string()).map_err(|e| EnvGenError::io(path, e))
}

pub fn load_env(path: &Path) -> Result<EnvironmentSpec, EnvGenError> {
    let text = fs::read_to_string(path).map_err(|e| EnvGenError::io(path, e))?;
    EnvironmentSpec::from_json_str(&text)
}
