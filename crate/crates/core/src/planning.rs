//! Geodesic distance fields and waypoint navigation.
//!
//! Distances are solved by single-pass fast-marching wavefront propagation
//! over the 8-connected stencil: axis steps cost one cell, diagonal steps
//! cost sqrt(2) cells, and diagonals never cut obstacle corners. Each cell is
//! settled once with its final distance, so the field is deterministic and
//! independent of iteration order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::grid::{Cell, CellSet, Grid, NEIGHBORS_8};
use crate::num::{real, Real};
use crate::world::{Action, AgentPose};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("all goal cells are blocked or out of bounds")]
    GoalBlocked,
    #[error("start cell is unreachable")]
    Unreachable,
}

/// Geodesic distance to the nearest goal cell, in meters. Obstacles and
/// unreachable cells carry infinity; goal cells carry exactly zero.
#[derive(Debug, Clone)]
pub struct DistanceField<T> {
    grid: Grid<T>,
    goals: CellSet,
    cell_size: T,
}

impl<T: Real> DistanceField<T> {
    pub fn value(&self, c: Cell) -> T {
        self.grid.get(c).copied().unwrap_or_else(T::infinity)
    }

    pub fn goals(&self) -> &CellSet {
        &self.goals
    }

    pub fn cell_size(&self) -> T {
        self.cell_size
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }
}

#[derive(Debug)]
struct HeapEntry<T> {
    dist: T,
    cell: Cell,
}

impl<T: Real> PartialEq for HeapEntry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dist == other.dist && self.cell == other.cell
    }
}
impl<T: Real> Eq for HeapEntry<T> {}
impl<T: Real> PartialOrd for HeapEntry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for HeapEntry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we need the nearest band cell.
        // Distances in the band are always finite, ties break row-major.
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

/// Whether moving from `c` by `(dx, dy)` is admissible: destination free,
/// and for diagonals both orthogonal side cells free (no corner cutting).
fn can_step(obstacles: &Grid<bool>, c: Cell, dx: i32, dy: i32) -> bool {
    let n = Cell::new(c.x + dx, c.y + dy);
    let free = |cell: Cell| obstacles.get(cell).map(|o| !o).unwrap_or(false);
    if !free(n) {
        return false;
    }
    if dx != 0 && dy != 0 {
        free(Cell::new(c.x + dx, c.y)) && free(Cell::new(c.x, c.y + dy))
    } else {
        true
    }
}

/// Solve the distance field for `goals` over an obstacle grid
/// (`true` = blocked).
pub fn fmm_field<T: Real>(
    obstacles: &Grid<bool>,
    goals: &CellSet,
    cell_size: T,
) -> Result<DistanceField<T>, PlanError> {
    let mut grid = Grid::new(obstacles.width(), obstacles.height(), T::infinity());
    let mut heap: BinaryHeap<HeapEntry<T>> = BinaryHeap::new();
    let mut seeded = CellSet::new();

    for &g in goals {
        if obstacles.get(g).map(|o| !o).unwrap_or(false) {
            grid.set(g, T::zero());
            heap.push(HeapEntry {
                dist: T::zero(),
                cell: g,
            });
            seeded.insert(g);
        }
    }
    if seeded.is_empty() {
        return Err(PlanError::GoalBlocked);
    }

    let axis = cell_size;
    let diag = cell_size * real(std::f64::consts::SQRT_2);

    while let Some(HeapEntry { dist, cell }) = heap.pop() {
        if dist > *grid.at(cell) {
            continue; // stale entry
        }
        for (dx, dy) in NEIGHBORS_8 {
            if !can_step(obstacles, cell, dx, dy) {
                continue;
            }
            let n = Cell::new(cell.x + dx, cell.y + dy);
            let step = if dx != 0 && dy != 0 { diag } else { axis };
            let nd = dist + step;
            if nd < *grid.at(n) {
                grid.set(n, nd);
                heap.push(HeapEntry { dist: nd, cell: n });
            }
        }
    }

    Ok(DistanceField {
        grid,
        goals: seeded,
        cell_size,
    })
}

/// Ordered cell walk from start toward a goal, strictly descending in field
/// value at every step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub cells: Vec<Cell>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Steepest-descent walk on the field. Requires a finite start value.
pub fn extract_path<T: Real>(
    field: &DistanceField<T>,
    obstacles: &Grid<bool>,
    start: Cell,
) -> Result<Path, PlanError> {
    let mut current = start;
    let mut value = field.value(current);
    if !value.is_finite() {
        return Err(PlanError::Unreachable);
    }
    let mut cells = vec![current];
    while value > T::zero() {
        let mut best: Option<(T, Cell)> = None;
        for (dx, dy) in NEIGHBORS_8 {
            if !can_step(obstacles, current, dx, dy) {
                continue;
            }
            let n = Cell::new(current.x + dx, current.y + dy);
            let v = field.value(n);
            if v < value {
                let better = match best {
                    None => true,
                    Some((bv, _)) => v < bv,
                };
                if better {
                    best = Some((v, n));
                }
            }
        }
        match best {
            Some((v, n)) => {
                current = n;
                value = v;
                cells.push(n);
            }
            // Field invariant guarantees a descending neighbor away from
            // goals; bail defensively if the caller mixed fields and grids.
            None => break,
        }
    }
    Ok(Path { cells })
}

/// Farthest path cell within `horizon` meters of the pose; falls back to the
/// first path cell when even that lies beyond the horizon.
pub fn local_goal<T: Real>(path: &Path, pose: &AgentPose<T>, horizon_m: T, cell_size: T) -> Cell {
    assert!(!path.is_empty(), "local_goal requires a non-empty path");
    let mut chosen = path.cells[0];
    for &c in &path.cells {
        let (cx, cy) = c.center(cell_size.to_f64().unwrap_or(1.0));
        let d = pose.distance_to(real(cx), real(cy));
        if d <= horizon_m {
            chosen = c;
        }
    }
    chosen
}

/// Normalize an angle in degrees to `(-180, 180]`.
fn wrap_deg<T: Real>(mut a: T) -> T {
    let full = real::<T>(360.0);
    let half = real::<T>(180.0);
    while a > half {
        a = a - full;
    }
    while a <= -half {
        a = a + full;
    }
    a
}

/// Discrete action toward a waypoint: stop at the goal, rotate while the
/// heading error exceeds the tolerance (positive error turns left /
/// counter-clockwise), otherwise move forward.
pub fn next_action<T: Real>(
    pose: &AgentPose<T>,
    waypoint: (T, T),
    at_goal: bool,
    heading_tol_deg: T,
) -> Action {
    if at_goal {
        return Action::Stop;
    }
    let dx = waypoint.0 - pose.x;
    let dy = waypoint.1 - pose.y;
    if dx == T::zero() && dy == T::zero() {
        return Action::MoveForward;
    }
    let bearing = dy.atan2(dx).to_degrees();
    let err = wrap_deg(bearing - pose.heading_deg);
    if err.abs() > heading_tol_deg {
        if err > T::zero() {
            Action::TurnLeft
        } else {
            Action::TurnRight
        }
    } else {
        Action::MoveForward
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(w: usize, h: usize) -> Grid<bool> {
        Grid::new(w, h, false)
    }

    fn set_from(cells: &[(i32, i32)]) -> CellSet {
        cells.iter().map(|&(x, y)| Cell::new(x, y)).collect()
    }

    #[test]
    fn axis_distance_is_linear() {
        let g = open(10, 1);
        let field = fmm_field::<f64>(&g, &set_from(&[(0, 0)]), 0.25).unwrap();
        for x in 0..10 {
            let v = field.value(Cell::new(x, 0));
            assert!((v - 0.25 * x as f64).abs() < 1e-12, "x={x} v={v}");
        }
    }

    #[test]
    fn walled_off_cell_is_infinite() {
        let mut g = open(5, 5);
        for (x, y) in [(1, 0), (1, 1), (0, 1)] {
            g.set(Cell::new(x, y), true);
        }
        let field = fmm_field::<f64>(&g, &set_from(&[(4, 4)]), 0.25).unwrap();
        assert!(field.value(Cell::new(0, 0)).is_infinite());
    }

    #[test]
    fn all_goals_blocked_is_an_error() {
        let mut g = open(3, 3);
        g.set(Cell::new(1, 1), true);
        let err = fmm_field::<f64>(&g, &set_from(&[(1, 1)]), 0.25).unwrap_err();
        assert!(matches!(err, PlanError::GoalBlocked));
        let err = fmm_field::<f64>(&g, &CellSet::new(), 0.25).unwrap_err();
        assert!(matches!(err, PlanError::GoalBlocked));
    }

    #[test]
    fn field_is_goal_order_invariant() {
        let g = open(8, 8);
        let a = fmm_field::<f64>(&g, &set_from(&[(0, 0), (7, 7)]), 0.25).unwrap();
        let b = fmm_field::<f64>(&g, &set_from(&[(7, 7), (0, 0)]), 0.25).unwrap();
        for c in (0..8).flat_map(|y| (0..8).map(move |x| Cell::new(x, y))) {
            assert_eq!(a.value(c), b.value(c));
        }
    }

    #[test]
    fn start_at_goal_gives_single_cell_path() {
        let g = open(4, 4);
        let field = fmm_field::<f64>(&g, &set_from(&[(2, 2)]), 0.25).unwrap();
        let p = extract_path(&field, &g, Cell::new(2, 2)).unwrap();
        assert_eq!(p.cells, vec![Cell::new(2, 2)]);
    }

    #[test]
    fn corridor_path_is_collinear() {
        let g = open(6, 1);
        let field = fmm_field::<f64>(&g, &set_from(&[(0, 0)]), 0.25).unwrap();
        let p = extract_path(&field, &g, Cell::new(5, 0)).unwrap();
        assert_eq!(p.len(), 6);
        assert!(p.cells.iter().all(|c| c.y == 0));
    }

    #[test]
    fn path_descends_strictly() {
        let mut g = open(9, 9);
        // U-shaped obstacle around the goal approach.
        for x in 2..7 {
            g.set(Cell::new(x, 4), true);
        }
        for y in 2..5 {
            g.set(Cell::new(2, y), true);
            g.set(Cell::new(6, y), true);
        }
        let field = fmm_field::<f64>(&g, &set_from(&[(4, 3)]), 0.25).unwrap();
        let p = extract_path(&field, &g, Cell::new(4, 7)).unwrap();
        for pair in p.cells.windows(2) {
            assert!(field.value(pair[1]) < field.value(pair[0]));
            assert!((pair[0].x - pair[1].x).abs() <= 1 && (pair[0].y - pair[1].y).abs() <= 1);
        }
        assert_eq!(*p.cells.last().unwrap(), Cell::new(4, 3));
    }

    #[test]
    fn unreachable_start_is_an_error() {
        let mut g = open(5, 1);
        g.set(Cell::new(2, 0), true);
        let field = fmm_field::<f64>(&g, &set_from(&[(0, 0)]), 0.25).unwrap();
        let err = extract_path(&field, &g, Cell::new(4, 0)).unwrap_err();
        assert!(matches!(err, PlanError::Unreachable));
    }

    #[test]
    fn local_goal_respects_horizon() {
        let cells: Vec<Cell> = (0..17).map(|x| Cell::new(x, 0)).collect();
        let path = Path { cells };
        let pose = AgentPose::new(0.125, 0.125, 0.0);
        // 4 m straight path, horizon 2 m -> the cell whose center is 2 m out.
        let c = local_goal(&path, &pose, 2.0, 0.25);
        assert_eq!(c, Cell::new(8, 0));
        // Horizon covering everything -> last cell.
        let c = local_goal(&path, &pose, 100.0, 0.25);
        assert_eq!(c, Cell::new(16, 0));
        // Zero horizon -> first cell.
        let c = local_goal(&path, &pose, 0.0, 0.25);
        assert_eq!(c, Cell::new(0, 0));
    }

    #[test]
    fn next_action_rules() {
        let pose = AgentPose::new(1.0, 1.0, 0.0);
        assert_eq!(next_action(&pose, (2.0, 1.0), false, 15.0), Action::MoveForward);
        assert_eq!(next_action(&pose, (1.0, 2.0), false, 15.0), Action::TurnLeft);
        assert_eq!(next_action(&pose, (1.0, 0.0), false, 15.0), Action::TurnRight);
        assert_eq!(next_action(&pose, (2.0, 1.0), true, 15.0), Action::Stop);
        // Behind the agent: wrap to (-180, 180].
        let west = next_action(&pose, (0.0, 1.0), false, 15.0);
        assert!(matches!(west, Action::TurnLeft | Action::TurnRight));
    }

    #[test]
    fn eikonal_consistency_between_neighbors() {
        let mut g = open(12, 12);
        for (x, y) in [(3, 3), (3, 4), (4, 3), (7, 8), (8, 8), (2, 9)] {
            g.set(Cell::new(x, y), true);
        }
        let field = fmm_field::<f64>(&g, &set_from(&[(0, 0)]), 0.25).unwrap();
        let diag = 0.25 * std::f64::consts::SQRT_2;
        for c in (0..12).flat_map(|y| (0..12).map(move |x| Cell::new(x, y))) {
            if !field.value(c).is_finite() {
                continue;
            }
            for (dx, dy) in NEIGHBORS_8 {
                if !can_step(&g, c, dx, dy) {
                    continue;
                }
                let n = Cell::new(c.x + dx, c.y + dy);
                if !field.value(n).is_finite() {
                    continue;
                }
                let bound = if dx != 0 && dy != 0 { diag } else { 0.25 };
                assert!(
                    (field.value(c) - field.value(n)).abs() <= bound + 1e-9,
                    "inconsistent at {c:?} -> {n:?}"
                );
            }
        }
    }
}
