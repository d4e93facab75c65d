//! Gridded configuration spaces built from scenario geometry.

mod geometry;
mod grasp;
mod grid;
mod map;
mod scenario;

pub use geometry::{ConvexPolygon, Role, Shape, ShapeSet, TaggedShape, Vec2};
pub use grasp::{grasp_cspace, GraspScene, PoseClass};
pub use grid::{Axis, GridSpec};
pub use map::{check_connectivity, rasterize_scenario, CSpaceMap, CellClass};
pub use scenario::{
    builtin_scenario, Scene, ScenarioParams, CORRIDOR_BAND, CORRIDOR_NARROW_LEFT, CORRIDOR_WIDE_WIDTH,
    MAZE_WALLS, SCENARIOS,
};
