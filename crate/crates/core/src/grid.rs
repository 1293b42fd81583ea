//! Dense 2D grids and cell coordinates shared by the world, mapping and
//! planning layers.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Integer cell coordinate. Ordering is row-major (y first) so that
/// `BTreeSet<Cell>` iteration and tie-breaks are deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    /// Center of the cell in meters for a given cell size.
    pub fn center(&self, cell_size: f64) -> (f64, f64) {
        (
            (self.x as f64 + 0.5) * cell_size,
            (self.y as f64 + 0.5) * cell_size,
        )
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

/// Deterministically ordered cell set.
pub type CellSet = BTreeSet<Cell>;

/// 4-neighborhood offsets (E, W, S, N).
pub const NEIGHBORS_4: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// 8-neighborhood offsets, row-major order for deterministic scans.
pub const NEIGHBORS_8: [(i32, i32); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Dense row-major grid of values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<V> {
    width: usize,
    height: usize,
    data: Vec<V>,
}

impl<V: Clone> Grid<V> {
    pub fn new(width: usize, height: usize, fill: V) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    fn idx(&self, c: Cell) -> usize {
        c.y as usize * self.width + c.x as usize
    }

    pub fn get(&self, c: Cell) -> Option<&V> {
        if self.in_bounds(c) {
            Some(&self.data[self.idx(c)])
        } else {
            None
        }
    }

    /// Panics when out of bounds; use for cells already validated.
    pub fn at(&self, c: Cell) -> &V {
        assert!(self.in_bounds(c), "cell {c:?} out of bounds");
        &self.data[self.idx(c)]
    }

    pub fn set(&mut self, c: Cell, v: V) {
        assert!(self.in_bounds(c), "cell {c:?} out of bounds");
        let i = self.idx(c);
        self.data[i] = v;
    }

    /// Row-major iteration over all cells.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let w = self.width as i32;
        let h = self.height as i32;
        (0..h).flat_map(move |y| (0..w).map(move |x| Cell::new(x, y)))
    }

    pub fn values(&self) -> impl Iterator<Item = &V> {
        self.data.iter()
    }
}
