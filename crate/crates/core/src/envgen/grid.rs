//! Static obstacle fields: 30×30 cellular-automaton grids and their navigability test.

use super::ca::{ca_smooth_step, CellMatrix};
use super::EnvGenError;
use crate::seed::rng_from_seed;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

pub const GRID_SIZE: usize = 30;
pub const CELL_SIZE: f64 = 0.15;
pub const DEFAULT_ROBOT_RADIUS: f64 = 0.3;
/// Radius used by the catalog's navigability filter. With thresholds (5, 1)
/// smoothing leaves the random fill largely intact, and any inflation rejects
/// nearly every grid at fills of 0.2 and above, so the filter uses raw
/// 4-connectivity of free cells.
pub const CATALOG_NAVIGABILITY_RADIUS: f64 = 0.0;
pub const DEFAULT_RETRY_BUDGET: u32 = 1000;

/// Fill fractions and smoothing iteration counts of the twelve static parameter sets.
pub const INITIAL_FILLS: [f64; 4] = [0.15, 0.20, 0.25, 0.30];
pub const SMOOTHING_ITERATIONS: [u32; 3] = [2, 3, 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CAParams {
    pub initial_fill: f64,
    pub smoothing_iterations: u32,
    pub fill_threshold: u8,
    pub clear_threshold: u8,
    pub seed: u64,
}

impl CAParams {
    pub fn new(initial_fill: f64, smoothing_iterations: u32, seed: u64) -> Self {
        Self {
            initial_fill,
            smoothing_iterations,
            fill_threshold: 5,
            clear_threshold: 1,
            seed,
        }
    }

    /// Parameter set `index` in 0..12: fill-major, iterations-minor.
    pub fn benchmark_set(index: usize, seed: u64) -> Self {
        Self::new(
            INITIAL_FILLS[index / SMOOTHING_ITERATIONS.len()],
            SMOOTHING_ITERATIONS[index % SMOOTHING_ITERATIONS.len()],
            seed,
        )
    }

    pub fn validate(&self) -> Result<(), EnvGenError> {
        // A zero fill is accepted: it yields the empty field.
        if !(0.0..1.0).contains(&self.initial_fill) {
            return Err(EnvGenError::InvalidParams(format!(
                "initial_fill {} outside [0, 1)",
                self.initial_fill
            )));
        }
        if self.fill_threshold > 8 || self.clear_threshold > 8 {
            return Err(EnvGenError::InvalidParams(format!(
                "thresholds ({}, {}) outside [0, 8]",
                self.fill_threshold, self.clear_threshold
            )));
        }
        Ok(())
    }
}

/// A 30×30 occupancy grid. Row 0 is the entry edge facing the start, row 29
/// the exit edge facing the goal; columns run across the start-goal axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    cells: CellMatrix,
    cell_size: f64,
}

impl OccupancyGrid {
    pub fn empty() -> Self {
        Self {
            cells: CellMatrix::new(GRID_SIZE, GRID_SIZE),
            cell_size: CELL_SIZE,
        }
    }

    pub fn from_cells(cells: CellMatrix, cell_size: f64) -> Result<Self, EnvGenError> {
        if cells.rows() != GRID_SIZE || cells.cols() != GRID_SIZE {
            return Err(EnvGenError::Dimensions {
                rows: cells.rows(),
                cols: cells.cols(),
            });
        }
        Ok(Self { cells, cell_size })
    }

    pub fn cells(&self) -> &CellMatrix {
        &self.cells
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn is_occupied(&self, row: usize, col: usize) -> bool {
        self.cells.get(row, col)
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells.set(row, col, value);
    }

    pub fn fill_fraction(&self) -> f64 {
        self.cells.fill_fraction()
    }

    /// Rows rendered as `'0'`/`'1'` strings.
    pub fn to_row_strings(&self) -> Vec<String> {
        (0..GRID_SIZE)
            .map(|r| {
                (0..GRID_SIZE)
                    .map(|c| if self.is_occupied(r, c) { '1' } else { '0' })
                    .collect()
            })
            .collect()
    }
}

/// Obstacle inflation radius in cells for a robot of the given radius.
pub fn inflation_cells(robot_radius: f64, cell_size: f64) -> usize {
    (robot_radius / cell_size - 1e-9).ceil().max(0.0) as usize
}

/// True iff a 4-connected free path links the entry row to the exit row after
/// inflating obstacles by `⌈radius / cell_size⌉` cells (Chebyshev). The lateral
/// grid borders are bounded by walls and inflate like obstacles; the entry and
/// exit borders are open.
pub fn is_navigable(grid: &OccupancyGrid, robot_radius: f64) -> bool {
    let n = GRID_SIZE;
    let k = inflation_cells(robot_radius, grid.cell_size()) as isize;
    let mut blocked = vec![false; n * n];
    for r in 0..n {
        for c in 0..n {
            if !grid.is_occupied(r, c) {
                continue;
            }
            for rr in (r as isize - k).max(0)..=(r as isize + k).min(n as isize - 1) {
                for cc in (c as isize - k).max(0)..=(c as isize + k).min(n as isize - 1) {
                    blocked[rr as usize * n + cc as usize] = true;
                }
            }
        }
    }
    for r in 0..n {
        for c in 0..(k as usize).min(n) {
            blocked[r * n + c] = true;
            blocked[r * n + (n - 1 - c)] = true;
        }
    }

    let mut seen = vec![false; n * n];
    let mut queue = VecDeque::new();
    for c in 0..n {
        if !blocked[c] {
            seen[c] = true;
            queue.push_back((0usize, c));
        }
    }
    while let Some((r, c)) = queue.pop_front() {
        if r == n - 1 {
            return true;
        }
        let neighbors = [
            (r.wrapping_sub(1), c),
            (r + 1, c),
            (r, c.wrapping_sub(1)),
            (r, c + 1),
        ];
        for (nr, nc) in neighbors {
            if nr < n && nc < n && !blocked[nr * n + nc] && !seen[nr * n + nc] {
                seen[nr * n + nc] = true;
                queue.push_back((nr, nc));
            }
        }
    }
    false
}

/// Random fill followed by smoothing, without the navigability filter.
pub fn ca_grid(params: &CAParams, seed: u64) -> OccupancyGrid {
    let mut rng = rng_from_seed(seed);
    let total = GRID_SIZE * GRID_SIZE;
    let count = ((total as f64) * params.initial_fill).round() as usize;
    let mut cells = CellMatrix::new(GRID_SIZE, GRID_SIZE);
    for idx in sample(&mut rng, total, count.min(total)) {
        cells.as_mut_slice()[idx] = true;
    }
    for _ in 0..params.smoothing_iterations {
        cells = ca_smooth_step(&cells, params.fill_threshold, params.clear_threshold);
    }
    OccupancyGrid {
        cells,
        cell_size: CELL_SIZE,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StaticGenOptions {
    pub robot_radius: f64,
    pub retry_budget: u32,
}

impl Default for StaticGenOptions {
    fn default() -> Self {
        Self {
            robot_radius: CATALOG_NAVIGABILITY_RADIUS,
            retry_budget: DEFAULT_RETRY_BUDGET,
        }
    }
}

/// An accepted static grid and the sub-seed that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticGeneration {
    pub grid: OccupancyGrid,
    pub accepted_seed: u64,
    pub attempts: u32,
}

/// Rejection-samples a navigable grid, trying sub-seeds `seed, seed+1, …`.
pub fn generate_static(params: &CAParams) -> Result<StaticGeneration, EnvGenError> {
    generate_static_with(params, &StaticGenOptions::default())
}

pub fn generate_static_with(
    params: &CAParams,
    options: &StaticGenOptions,
) -> Result<StaticGeneration, EnvGenError> {
    params.validate()?;
    for retry in 0..options.retry_budget {
        let sub_seed = params.seed.wrapping_add(u64::from(retry));
        let grid = ca_grid(params, sub_seed);
        if is_navigable(&grid, options.robot_radius) {
            return Ok(StaticGeneration {
                grid,
                accepted_seed: sub_seed,
                attempts: retry + 1,
            });
        }
    }
    Err(EnvGenError::GenerationFailed {
        params: *params,
        attempts: options.retry_budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: explicit inflation by distance test, then flood fill.
    fn bfs_oracle(grid: &OccupancyGrid, k: i64) -> bool {
        let n = GRID_SIZE as i64;
        let free = |r: i64, c: i64| -> bool {
            if c < k || c >= n - k {
                return false;
            }
            for rr in 0..n {
                for cc in 0..n {
                    if grid.is_occupied(rr as usize, cc as usize)
                        && (rr - r).abs().max((cc - c).abs()) <= k
                    {
                        return false;
                    }
                }
            }
            true
        };
        let mut reach = vec![vec![false; n as usize]; n as usize];
        let mut stack: Vec<(i64, i64)> = (0..n).filter(|&c| free(0, c)).map(|c| (0, c)).collect();
        for &(r, c) in &stack {
            reach[r as usize][c as usize] = true;
        }
        while let Some((r, c)) = stack.pop() {
            for (dr, dc) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (nr, nc) = (r + dr, c + dc);
                if (0..n).contains(&nr) && (0..n).contains(&nc) && !reach[nr as usize][nc as usize] && free(nr, nc) {
                    reach[nr as usize][nc as usize] = true;
                    stack.push((nr, nc));
                }
            }
        }
        (0..n as usize).any(|c| reach[n as usize - 1][c])
    }

    #[test]
    fn all_free_grid_is_navigable() {
        assert!(is_navigable(&OccupancyGrid::empty(), 0.3));
    }

    #[test]
    fn full_row_blocks() {
        let mut g = OccupancyGrid::empty();
        for c in 0..GRID_SIZE {
            g.set(15, c, true);
        }
        assert!(!is_navigable(&g, 0.3));
        assert!(!is_navigable(&g, 0.0));
    }

    #[test]
    fn single_cell_gap_depends_on_radius() {
        let mut g = OccupancyGrid::empty();
        for c in 0..GRID_SIZE {
            if c != 14 {
                g.set(15, c, true);
            }
        }
        assert!(!is_navigable(&g, 0.3));
        assert!(is_navigable(&g, 0.0));
        assert_eq!(bfs_oracle(&g, 2), false);
        assert_eq!(bfs_oracle(&g, 0), true);
    }

    #[test]
    fn navigability_matches_oracle_on_random_grids() {
        for seed in 0..40 {
            let g = ca_grid(&CAParams::new(0.25, 3, seed), seed);
            for (radius, k) in [(0.0, 0), (0.15, 1), (0.3, 2)] {
                assert_eq!(is_navigable(&g, radius), bfs_oracle(&g, k), "seed {seed} radius {radius}");
            }
        }
    }

    #[test]
    fn zero_fill_accepted_immediately() {
        let gen = generate_static(&CAParams::new(0.0, 3, 11)).unwrap();
        assert_eq!(gen.attempts, 1);
        assert_eq!(gen.grid, OccupancyGrid::empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let p = CAParams::new(0.3, 4, 1234);
        assert_eq!(generate_static(&p).unwrap(), generate_static(&p).unwrap());
    }

    #[test]
    fn fill_count_is_exact_before_smoothing() {
        let mut p = CAParams::new(0.25, 0, 5);
        p.smoothing_iterations = 0;
        let g = ca_grid(&p, 5);
        assert_eq!(g.cells().filled_count(), 225);
    }

    #[test]
    fn exhausted_budget_names_params() {
        let p = CAParams::new(0.25, 2, 1);
        let err = generate_static_with(&p, &StaticGenOptions { robot_radius: 0.3, retry_budget: 3 }).unwrap_err();
        assert!(matches!(err, EnvGenError::GenerationFailed { attempts: 3, .. }));
        assert!(err.to_string().contains("0.25"));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(CAParams::new(1.5, 2, 0).validate().is_err());
        let mut p = CAParams::new(0.2, 2, 0);
        p.fill_threshold = 9;
        assert!(p.validate().is_err());
    }
}
