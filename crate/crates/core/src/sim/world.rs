//! Obstacle geometry of an environment and its pose at a given time.

use crate::envgen::{DynamicBoxEnvSpec, DynamicWallEnvSpec, EnvironmentSpec, Layout, Obstacles, OccupancyGrid};
use crate::geom::{aabb_distance, slab_intersect, OrientedRect, Segment, Vec2};

/// Occupied cells as axis-aligned squares. Row `r` spans
/// `y ∈ [origin.y + r·s, origin.y + (r+1)·s]`, column `c` the analogous x range.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    pub origin: Vec2,
    pub cell_size: f64,
    pub rows: usize,
    pub cols: usize,
    cells: Vec<bool>,
}

impl GridGeometry {
    pub fn from_grid(grid: &OccupancyGrid, origin: Vec2) -> Self {
        let m = grid.cells();
        Self {
            origin,
            cell_size: grid.cell_size(),
            rows: m.rows(),
            cols: m.cols(),
            cells: m.as_slice().to_vec(),
        }
    }

    pub fn translated(&self, by: Vec2) -> Self {
        Self {
            origin: self.origin + by,
            ..self.clone()
        }
    }

    pub fn occupied(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn cell_bounds(&self, row: usize, col: usize) -> (Vec2, Vec2) {
        let lo = self.origin + Vec2::new(col as f64 * self.cell_size, row as f64 * self.cell_size);
        (lo, lo + Vec2::new(self.cell_size, self.cell_size))
    }

    pub fn extent(&self) -> (Vec2, Vec2) {
        (
            self.origin,
            self.origin + Vec2::new(self.cols as f64 * self.cell_size, self.rows as f64 * self.cell_size),
        )
    }

    /// Iterates occupied cells whose squares intersect `[lo, hi]`.
    pub fn occupied_in(&self, lo: Vec2, hi: Vec2) -> impl Iterator<Item = (usize, usize)> + '_ {
        let s = self.cell_size;
        let to_range = |a: f64, b: f64, n: usize| -> (usize, usize) {
            let first = (a / s).floor().max(0.0);
            let last = (b / s).floor().min(n as f64 - 1.0);
            if last < 0.0 || first > n as f64 - 1.0 || first > last {
                (1, 0)
            } else {
                (first as usize, last as usize)
            }
        };
        let (c0, c1) = to_range(lo.x - self.origin.x, hi.x - self.origin.x, self.cols);
        let (r0, r1) = to_range(lo.y - self.origin.y, hi.y - self.origin.y, self.rows);
        (r0..=r1)
            .flat_map(move |r| (c0..=c1).map(move |c| (r, c)))
            .filter(move |&(r, c)| r <= r1 && c <= c1 && self.occupied(r, c))
    }

    pub fn disc_intersects(&self, p: Vec2, radius: f64) -> bool {
        let pad = Vec2::new(radius, radius);
        self.occupied_in(p - pad, p + pad).any(|(r, c)| {
            let (lo, hi) = self.cell_bounds(r, c);
            aabb_distance(p, lo, hi) <= radius
        })
    }

    /// Grid traversal (Amanatides–Woo) to the first occupied cell along the ray.
    pub fn ray_intersect(&self, origin: Vec2, dir: Vec2, max_range: f64) -> Option<f64> {
        let (lo, hi) = self.extent();
        let t_enter = slab_intersect(origin, dir, lo, hi)?;
        if t_enter > max_range {
            return None;
        }
        let s = self.cell_size;
        let p = origin + dir * t_enter;
        let clamp_idx = |v: f64, n: usize| -> isize { ((v / s).floor() as isize).clamp(0, n as isize - 1) };
        let mut col = clamp_idx(p.x - lo.x, self.cols);
        let mut row = clamp_idx(p.y - lo.y, self.rows);

        let axis = |d: f64, o: f64, base: f64, idx: isize| -> (isize, f64, f64) {
            if d > 0.0 {
                (1, (base + (idx + 1) as f64 * s - o) / d, s / d)
            } else if d < 0.0 {
                (-1, (base + idx as f64 * s - o) / d, -s / d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_x, mut t_max_x, dt_x) = axis(dir.x, origin.x, lo.x, col);
        let (step_y, mut t_max_y, dt_y) = axis(dir.y, origin.y, lo.y, row);

        let mut t = t_enter;
        loop {
            if self.occupied(row as usize, col as usize) {
                return Some(t);
            }
            if t_max_x < t_max_y {
                col += step_x;
                t = t_max_x;
                t_max_x += dt_x;
            } else {
                row += step_y;
                t = t_max_y;
                t_max_y += dt_y;
            }
            if t > max_range || col < 0 || row < 0 || col >= self.cols as isize || row >= self.rows as isize {
                return None;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    None,
    Boxes(DynamicBoxEnvSpec),
    Walls(DynamicWallEnvSpec),
}

/// Static geometry plus the motion model of the dynamic obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub layout: Layout,
    pub grid: Option<GridGeometry>,
    pub boundary: Vec<Segment>,
    pub dynamics: Dynamics,
    pub wall_thickness: f64,
}

/// Obstacles at one instant.
#[derive(Debug, Clone)]
pub struct WorldSnapshot<'a> {
    pub grid: Option<&'a GridGeometry>,
    pub rects: Vec<OrientedRect>,
    pub segments: &'a [Segment],
}

impl World {
    pub fn new(env: &EnvironmentSpec, wall_thickness: f64) -> Self {
        let (grid, dynamics) = match &env.obstacles {
            Obstacles::Static(s) => (Some(GridGeometry::from_grid(&s.grid, env.layout.field.min)), Dynamics::None),
            Obstacles::DynamicBox(b) => (None, Dynamics::Boxes(b.clone())),
            Obstacles::DynamicWall(w) => (None, Dynamics::Walls(w.clone())),
        };
        Self {
            layout: env.layout.clone(),
            grid,
            boundary: env.layout.boundary_walls.clone(),
            dynamics,
            wall_thickness,
        }
    }

    /// Obstacle poses at world time `t` (seconds).
    pub fn at_time(&self, t: f64) -> WorldSnapshot<'_> {
        let rects = match &self.dynamics {
            Dynamics::None => Vec::new(),
            Dynamics::Boxes(spec) => spec.boxes.iter().map(|b| b.footprint_at(&spec.field, t)).collect(),
            Dynamics::Walls(spec) => spec.footprints_at(t, self.wall_thickness).to_vec(),
        };
        WorldSnapshot {
            grid: self.grid.as_ref(),
            rects,
            segments: &self.boundary,
        }
    }

    pub fn is_dynamic(&self) -> bool {
        !matches!(self.dynamics, Dynamics::None)
    }

    /// Longest motion period of the dynamic obstacles, if any.
    pub fn motion_period(&self) -> Option<f64> {
        match &self.dynamics {
            Dynamics::None => None,
            Dynamics::Boxes(spec) => spec
                .boxes
                .iter()
                .map(|b| b.exit_period(&spec.field))
                .fold(None, |acc, p| Some(acc.map_or(p, |a: f64| a.max(p)))),
            Dynamics::Walls(spec) => Some(spec.max_period()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envgen::{generate_dynamic_box, CellMatrix, EnvironmentSpec, GRID_SIZE};

    #[test]
    fn dynamic_box_snapshot_at_zero_has_boxes_on_left_edge() {
        let env = EnvironmentSpec::dynamic_box("b", generate_dynamic_box(8));
        let world = World::new(&env, 0.1);
        let snap = world.at_time(0.0);
        assert!(!snap.rects.is_empty());
        for r in &snap.rects {
            assert_eq!(r.center.x, env.layout.field.min.x);
        }
    }

    #[test]
    fn grid_ray_hits_first_occupied_cell() {
        let mut m = CellMatrix::new(GRID_SIZE, GRID_SIZE);
        m.set(10, 15, true);
        let grid = OccupancyGrid::from_cells(m, 0.15).unwrap();
        let g = GridGeometry::from_grid(&grid, Vec2::new(0.0, 0.0));
        let origin = Vec2::new(15.5 * 0.15, -1.0);
        let t = g.ray_intersect(origin, Vec2::new(0.0, 1.0), 5.0).unwrap();
        assert!((t - (1.0 + 10.0 * 0.15)).abs() < 1e-12);
        assert!(g.ray_intersect(origin, Vec2::new(0.0, -1.0), 5.0).is_none());
        // Starting inside the occupied cell reports zero.
        let inside = Vec2::new(15.5 * 0.15, 10.5 * 0.15);
        assert_eq!(g.ray_intersect(inside, Vec2::new(1.0, 0.0), 5.0), Some(0.0));
    }
}
