//! Cellular-automaton smoothing on boolean matrices.

use serde::{Deserialize, Serialize};

/// Row-major boolean matrix; `true` marks a filled (obstacle) cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

impl CellMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![false; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![true; rows * cols],
        }
    }

    /// Builds a matrix from row slices. Returns `None` if the rows are ragged.
    pub fn from_rows<R: AsRef<[bool]>>(rows: &[R]) -> Option<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return None;
        }
        let cells = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Some(Self {
            rows: rows.len(),
            cols,
            cells,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[row * self.cols + col] = value;
    }

    /// Cell value with out-of-bounds positions reported as filled.
    pub fn get_or_filled(&self, row: isize, col: isize) -> bool {
        if row < 0 || col < 0 || row as usize >= self.rows || col as usize >= self.cols {
            true
        } else {
            self.get(row as usize, col as usize)
        }
    }

    pub fn filled_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn fill_fraction(&self) -> f64 {
        if self.cells.is_empty() {
            0.0
        } else {
            self.filled_count() as f64 / self.cells.len() as f64
        }
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.cells
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [bool] {
        &mut self.cells
    }

    /// Number of filled cells among the 8 Moore neighbours; out-of-bounds counts as filled.
    pub fn filled_neighbors(&self, row: usize, col: usize) -> u8 {
        let mut n = 0;
        for dr in -1isize..=1 {
            for dc in -1isize..=1 {
                if (dr, dc) != (0, 0) && self.get_or_filled(row as isize + dr, col as isize + dc) {
                    n += 1;
                }
            }
        }
        n
    }
}

/// One synchronous smoothing pass: an empty cell fills when its filled-neighbour
/// count exceeds `fill_threshold`; a filled cell clears when the count is below
/// `clear_threshold`. All counts are taken from the input matrix.
pub fn ca_smooth_step(grid: &CellMatrix, fill_threshold: u8, clear_threshold: u8) -> CellMatrix {
    let mut out = grid.clone();
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            let n = grid.filled_neighbors(r, c);
            let filled = grid.get(r, c);
            if !filled && n > fill_threshold {
                out.set(r, c, true);
            } else if filled && n < clear_threshold {
                out.set(r, c, false);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn patch(bits: u16) -> CellMatrix {
        let mut m = CellMatrix::new(3, 3);
        for i in 0..9 {
            m.set(i / 3, i % 3, bits & (1 << i) != 0);
        }
        m
    }

    #[test]
    fn empty_cell_with_six_neighbors_fills() {
        // Interior cell of a 5x5 block, six neighbours filled.
        let mut m = CellMatrix::new(5, 5);
        for (r, c) in [(1, 1), (1, 2), (1, 3), (2, 1), (2, 3), (3, 1)] {
            m.set(r, c, true);
        }
        assert_eq!(m.filled_neighbors(2, 2), 6);
        assert!(ca_smooth_step(&m, 5, 1).get(2, 2));
    }

    #[test]
    fn isolated_filled_cell_clears() {
        let mut m = CellMatrix::new(5, 5);
        m.set(2, 2, true);
        assert!(!ca_smooth_step(&m, 5, 1).get(2, 2));
    }

    #[test]
    fn all_free_stays_free_away_from_corners() {
        // Corners see 5 out-of-bounds neighbours, which is not > 5.
        let m = CellMatrix::new(30, 30);
        assert_eq!(ca_smooth_step(&m, 5, 1), m);
    }

    #[test]
    fn all_filled_stays_filled() {
        let m = CellMatrix::filled(30, 30);
        assert_eq!(ca_smooth_step(&m, 5, 1), m);
        let corner = CellMatrix::filled(3, 3);
        assert_eq!(ca_smooth_step(&corner, 5, 1), corner);
    }

    #[test]
    fn corner_cell_of_empty_patch_counts_out_of_bounds() {
        let m = patch(0);
        assert_eq!(m.filled_neighbors(0, 0), 5);
        assert_eq!(m.filled_neighbors(1, 1), 0);
        assert_eq!(m.filled_neighbors(0, 1), 3);
    }

    proptest! {
        #[test]
        fn update_is_order_independent(bits in proptest::collection::vec(any::<bool>(), 64), fill in 0u8..=8, clear in 0u8..=8) {
            let rows: Vec<Vec<bool>> = bits.chunks(8).map(|c| c.to_vec()).collect();
            let m = CellMatrix::from_rows(&rows).unwrap();
            let forward = ca_smooth_step(&m, fill, clear);
            // Visit cells in reverse order, still reading only from the input.
            let mut reverse = m.clone();
            for idx in (0..64).rev() {
                let (r, c) = (idx / 8, idx % 8);
                let n = m.filled_neighbors(r, c);
                let v = m.get(r, c);
                reverse.set(r, c, if !v { n > fill } else { n >= clear });
            }
            prop_assert_eq!(forward, reverse);
        }
    }
}
