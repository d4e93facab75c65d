use std::collections::VecDeque;

use super::geometry::{Role, Shape, ShapeSet};
use super::grid::GridSpec;
use crate::error::{Error, Result};

/// Classification of a grid cell. Every non-free cell carries its boundary
/// penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellClass {
    Free,
    Obstacle(f64),
    Goal(f64),
    Exterior(f64),
}

impl CellClass {
    pub fn phi(&self) -> Option<f64> {
        match *self {
            CellClass::Free => None,
            CellClass::Obstacle(phi) | CellClass::Goal(phi) | CellClass::Exterior(phi) => Some(phi),
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, CellClass::Free)
    }

    pub fn is_goal(&self) -> bool {
        matches!(self, CellClass::Goal(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            CellClass::Free => "free",
            CellClass::Obstacle(_) => "obstacle",
            CellClass::Goal(_) => "goal",
            CellClass::Exterior(_) => "exterior",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CSpaceMap {
    pub name: String,
    grid: GridSpec,
    cells: Vec<CellClass>,
    goal_cells: Vec<usize>,
}

fn check_penalty(phi: f64) -> Result<()> {
    if phi.is_finite() && phi >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("penalty must be finite and >= 0, got {phi}")))
    }
}

impl CSpaceMap {
    pub fn new(name: impl Into<String>, grid: GridSpec, cells: Vec<CellClass>) -> Result<Self> {
        if cells.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: cells.len() });
        }
        for cell in &cells {
            if let Some(phi) = cell.phi() {
                check_penalty(phi)?;
            }
        }
        if let Some(i) = (0..cells.len()).find(|&i| grid.is_boundary(i) && cells[i].is_free()) {
            return Err(Error::InvalidGrid(format!(
                "domain is not closed: boundary cell {:?} is free",
                grid.coords(i)
            )));
        }
        if !cells.iter().any(CellClass::is_free) {
            return Err(Error::DegenerateScenario);
        }
        let goal_cells: Vec<usize> = (0..cells.len()).filter(|&i| cells[i].is_goal()).collect();
        if goal_cells.is_empty() {
            return Err(Error::UnsolvableScenario);
        }
        Ok(CSpaceMap { name: name.into(), grid, cells, goal_cells })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn cells(&self) -> &[CellClass] {
        &self.cells
    }

    pub fn cell(&self, index: usize) -> CellClass {
        self.cells[index]
    }

    pub fn goal_cells(&self) -> &[usize] {
        &self.goal_cells
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_free()).count()
    }

    /// Cell class at a continuous point; points outside the domain are `None`.
    pub fn classify(&self, x: &[f64]) -> Option<(usize, CellClass)> {
        self.grid.locate(x).map(|i| (i, self.cells[i]))
    }

    /// Rebuilds geometry from the map: one rectangle per obstacle and goal
    /// cell. Exterior cells are regenerated by the rasterizer itself.
    pub fn to_shapes(&self) -> ShapeSet {
        assert_eq!(self.grid.dim(), 2, "to_shapes supports planar maps");
        let half = [self.grid.axis(0).spacing / 2.0, self.grid.axis(1).spacing / 2.0];
        let mut set = ShapeSet::new();
        for (i, cell) in self.cells.iter().enumerate() {
            let c = self.grid.center(i);
            let rect = Shape::rect([c[0], c[1]], half).expect("positive spacing");
            match *cell {
                CellClass::Obstacle(phi) => set = set.obstacle_with_phi(rect, phi),
                CellClass::Goal(_) => set = set.goal(rect),
                _ => {}
            }
        }
        set
    }
}

/// Classifies each cell of a planar grid by cell-center containment.
///
/// Priority is obstacle, then goal, then the exterior ring, then free.
pub fn rasterize_scenario(
    shapes: &ShapeSet,
    grid: &GridSpec,
    default_obstacle_phi: f64,
    goal_phi: f64,
) -> Result<CSpaceMap> {
    if grid.dim() != 2 {
        return Err(Error::InvalidGrid(format!("rasterization needs a 2D grid, got {}D", grid.dim())));
    }
    check_penalty(default_obstacle_phi)?;
    check_penalty(goal_phi)?;
    for s in shapes.iter() {
        if let Some(phi) = s.phi {
            check_penalty(phi)?;
        }
    }
    let cells = (0..grid.len())
        .map(|i| {
            let c = grid.center(i);
            let p = [c[0], c[1]];
            let mut in_goal = false;
            for s in shapes.iter().filter(|s| s.shape.contains(p)) {
                match s.role {
                    Role::Obstacle => {
                        return CellClass::Obstacle(s.phi.unwrap_or(default_obstacle_phi));
                    }
                    Role::Goal => in_goal = true,
                }
            }
            if in_goal {
                CellClass::Goal(goal_phi)
            } else if grid.is_boundary(i) {
                CellClass::Exterior(default_obstacle_phi)
            } else {
                CellClass::Free
            }
        })
        .collect();
    CSpaceMap::new("custom", grid.clone(), cells)
}

/// True iff a goal cell is reachable from `start` through face-adjacent free cells.
pub fn check_connectivity(map: &CSpaceMap, start: usize) -> Result<bool> {
    if start >= map.cells.len() {
        return Err(Error::DimensionMismatch { expected: map.cells.len(), got: start });
    }
    if !map.cells[start].is_free() {
        return Err(Error::NotFree);
    }
    let grid = &map.grid;
    let mut seen = vec![false; map.cells.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        for a in 0..grid.dim() {
            for dir in [-1, 1] {
                let Some(j) = grid.neighbor(i, a, dir) else { continue };
                match map.cells[j] {
                    CellClass::Goal(_) => return Ok(true),
                    CellClass::Free if !seen[j] => {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> GridSpec {
        GridSpec::square(0.0, 10.0, 1.0).unwrap()
    }

    #[test]
    fn empty_shapes_are_unsolvable() {
        let err = rasterize_scenario(&ShapeSet::new(), &room(), 20.0, 0.0).unwrap_err();
        assert_eq!(err, Error::UnsolvableScenario);
    }

    #[test]
    fn boundary_ring_is_exterior() {
        let shapes = ShapeSet::new().goal(Shape::rect([5.5, 5.5], [0.5, 0.5]).unwrap());
        let map = rasterize_scenario(&shapes, &room(), 20.0, 0.0).unwrap();
        let g = map.grid();
        for i in 0..g.len() {
            if g.is_boundary(i) {
                assert_eq!(map.cell(i), CellClass::Exterior(20.0));
            }
        }
        assert_eq!(map.goal_cells(), &[g.index(&[5, 5])]);
        assert_eq!(map.free_count(), 63);
    }

    #[test]
    fn goal_on_corner_cell_beats_exterior() {
        let shapes = ShapeSet::new().goal(Shape::rect([9.5, 9.5], [0.5, 0.5]).unwrap());
        let map = rasterize_scenario(&shapes, &room(), 20.0, 0.0).unwrap();
        assert_eq!(map.goal_cells(), &[map.grid().index(&[9, 9])]);
        assert_eq!(map.cell(map.grid().index(&[9, 9])), CellClass::Goal(0.0));
    }

    #[test]
    fn obstacle_beats_goal() {
        let shapes = ShapeSet::new()
            .goal(Shape::rect([5.0, 5.0], [2.0, 2.0]).unwrap())
            .obstacle(Shape::rect([5.5, 5.5], [0.5, 0.5]).unwrap());
        let map = rasterize_scenario(&shapes, &room(), 20.0, 0.0).unwrap();
        assert_eq!(map.cell(map.grid().index(&[5, 5])), CellClass::Obstacle(20.0));
        assert_eq!(map.cell(map.grid().index(&[4, 4])), CellClass::Goal(0.0));
    }

    #[test]
    fn fully_blocked_is_degenerate() {
        let shapes = ShapeSet::new()
            .obstacle(Shape::rect([5.0, 5.0], [5.0, 5.0]).unwrap())
            .goal(Shape::rect([0.5, 0.5], [0.5, 0.5]).unwrap());
        let err = rasterize_scenario(&shapes, &room(), 20.0, 0.0).unwrap_err();
        assert_eq!(err, Error::DegenerateScenario);
    }

    #[test]
    fn connectivity_respects_walls() {
        let goal = Shape::rect([8.5, 5.5], [0.5, 0.5]).unwrap();
        let open = rasterize_scenario(&ShapeSet::new().goal(goal.clone()), &room(), 20.0, 0.0).unwrap();
        let start = open.grid().index(&[1, 1]);
        assert!(check_connectivity(&open, start).unwrap());
        assert!(check_connectivity(&open, open.grid().index(&[7, 5])).unwrap());

        let wall = Shape::rect([5.5, 5.0], [0.5, 5.0]).unwrap();
        let split =
            rasterize_scenario(&ShapeSet::new().goal(goal).obstacle(wall), &room(), 20.0, 0.0).unwrap();
        assert!(!check_connectivity(&split, start).unwrap());
        assert_eq!(check_connectivity(&split, split.grid().index(&[5, 5])), Err(Error::NotFree));
    }

    #[test]
    fn rasterization_is_idempotent() {
        let shapes = ShapeSet::new()
            .goal(Shape::rect([8.0, 8.0], [1.0, 1.0]).unwrap())
            .obstacle_with_phi(Shape::rect([4.0, 3.0], [1.2, 2.7]).unwrap(), 7.0);
        let map = rasterize_scenario(&shapes, &room(), 20.0, 0.0).unwrap();
        let again = rasterize_scenario(&map.to_shapes(), &room(), 20.0, 0.0).unwrap();
        assert_eq!(map.cells(), again.cells());
    }
}
