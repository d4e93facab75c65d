//! Built-in scenarios.
//!
//! | name         | domain        | goal                         |
//! |--------------|---------------|------------------------------|
//! | `empty-room` | [-2.5, 2.5]²  | 0.6 x 0.6 square at origin   |
//! | `corridor`   | [0, 10]²      | 1 x 1 square, top-right      |
//! | `maze`       | [-5, 5]²      | 0.6 x 0.6 square at origin   |
//! | `grasp`      | [-3, 3]² x S¹ | jaw around the nut           |

use std::collections::BTreeMap;

use super::geometry::{Shape, ShapeSet};
use super::grasp::{grasp_cspace, GraspScene};
use super::grid::GridSpec;
use super::map::{rasterize_scenario, CSpaceMap};
use crate::error::{Error, Result};

pub type ScenarioParams = BTreeMap<String, f64>;

pub const SCENARIOS: [(&str, &str); 4] = [
    ("empty-room", "open square room with a small goal at the center"),
    ("corridor", "two obstacles forming a wide and a narrow corridor; goal top-right"),
    ("maze", "piecewise-rectangular maze with the goal at the origin"),
    ("grasp", "planar gripper closing on a square nut, (x, y, θ) c-space"),
];

/// Width of the wide corridor, which runs along the right wall.
pub const CORRIDOR_WIDE_WIDTH: f64 = 4.0;
/// Vertical extent of the obstacle band that the corridors cut through.
pub const CORRIDOR_BAND: [f64; 2] = [2.5, 5.0];
/// Left edge of the narrow corridor.
pub const CORRIDOR_NARROW_LEFT: f64 = 2.0;
const CORRIDOR_SIZE: f64 = 10.0;

/// Maze walls as (lower-left, upper-right) corners.
pub const MAZE_WALLS: [([f64; 2], [f64; 2]); 6] = [
    ([-5.0, 2.5], [3.0, 3.0]),
    ([-3.0, -3.0], [5.0, -2.5]),
    ([1.5, -1.5], [2.0, 2.5]),
    ([-1.5, -1.0], [-1.0, 2.5]),
    ([-3.5, -2.5], [-3.0, 1.0]),
    ([-4.5, -4.5], [-3.5, -3.5]),
];

#[derive(Debug, Clone, PartialEq)]
pub enum Scene {
    Planar(ShapeSet),
    Grasp(GraspScene),
}

impl Scene {
    pub fn rasterize(&self, name: &str, grid: &GridSpec, obstacle_phi: f64, goal_phi: f64) -> Result<CSpaceMap> {
        let mut map = match self {
            Scene::Planar(shapes) => rasterize_scenario(shapes, grid, obstacle_phi, goal_phi)?,
            Scene::Grasp(scene) => grasp_cspace(scene, grid, obstacle_phi, goal_phi)?,
        };
        map.name = name.to_string();
        Ok(map)
    }
}

fn take(params: &mut ScenarioParams, key: &str, default: f64) -> f64 {
    params.remove(key).unwrap_or(default)
}

fn rect(lo: [f64; 2], hi: [f64; 2]) -> Shape {
    Shape::rect_corners(lo, hi).expect("built-in geometry is valid")
}

pub fn builtin_scenario(name: &str, params: &ScenarioParams) -> Result<(Scene, GridSpec)> {
    let mut params = params.clone();
    let out = match name {
        "empty-room" => {
            let h = take(&mut params, "spacing", 0.1);
            let shapes = ShapeSet::new().goal(rect([-0.3, -0.3], [0.3, 0.3]));
            (Scene::Planar(shapes), GridSpec::square(-2.5, 2.5, h)?)
        }
        "corridor" => {
            let h = take(&mut params, "spacing", 0.1);
            let w = take(&mut params, "narrow_width", 1.5);
            (Scene::Planar(corridor_shapes(w)?), GridSpec::square(0.0, CORRIDOR_SIZE, h)?)
        }
        "maze" => {
            let h = take(&mut params, "spacing", 0.1);
            let mut shapes = ShapeSet::new().goal(rect([-0.3, -0.3], [0.3, 0.3]));
            for (lo, hi) in MAZE_WALLS {
                shapes = shapes.obstacle(rect(lo, hi));
            }
            (Scene::Planar(shapes), GridSpec::square(-5.0, 5.0, h)?)
        }
        "grasp" => {
            let h = take(&mut params, "spacing", 0.25);
            let ht = take(&mut params, "spacing_theta", 20.0);
            (Scene::Grasp(GraspScene::standard()), GraspScene::standard_grid(h, ht)?)
        }
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    if let Some(key) = params.keys().next() {
        return Err(Error::InvalidParameter(format!("scenario `{name}` has no parameter `{key}`")));
    }
    Ok(out)
}

fn corridor_shapes(narrow_width: f64) -> Result<ShapeSet> {
    let [band_lo, band_hi] = CORRIDOR_BAND;
    let narrow_right = CORRIDOR_NARROW_LEFT + narrow_width;
    if !(narrow_width > 0.0) {
        return Err(Error::InvalidParameter(format!("corridor width must be positive, got {narrow_width}")));
    }
    let wide_left = CORRIDOR_SIZE - CORRIDOR_WIDE_WIDTH;
    if narrow_right >= wide_left {
        return Err(Error::InvalidParameter(format!("corridor width {narrow_width} does not fit the domain")));
    }
    Ok(ShapeSet::new()
        .goal(rect([CORRIDOR_SIZE - 1.0, CORRIDOR_SIZE - 1.0], [CORRIDOR_SIZE, CORRIDOR_SIZE]))
        .obstacle(rect([0.0, band_lo], [CORRIDOR_NARROW_LEFT, band_hi]))
        .obstacle(rect([narrow_right, band_lo], [wide_left, band_hi])))
}
