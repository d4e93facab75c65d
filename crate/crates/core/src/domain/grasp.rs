//! Planar grasping task lifted into an (x, y, θ) configuration space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geometry::ConvexPolygon;
use super::grid::{Axis, GridSpec};
use super::map::{CSpaceMap, CellClass};
use crate::error::{Error, Result};

/// Gripper and acceptance region are expressed in the gripper frame, whose
/// fingers point along +y. The nut is fixed in the world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspScene {
    pub gripper: Vec<ConvexPolygon>,
    pub nut: ConvexPolygon,
    pub acceptance: ConvexPolygon,
}

impl GraspScene {
    pub fn new(gripper: Vec<ConvexPolygon>, nut: ConvexPolygon, acceptance: ConvexPolygon) -> Result<Self> {
        if gripper.is_empty() {
            return Err(Error::InvalidGeometry("gripper needs at least one polygon".into()));
        }
        Ok(GraspScene { gripper, nut, acceptance })
    }

    /// Palm 1.5 x 0.25, two 0.25 x 0.75 fingers leaving a 1.0 wide jaw,
    /// a 0.5 x 0.5 nut at the origin, and a 0.6 x 0.5 acceptance box
    /// centered between the fingers.
    pub fn standard() -> Self {
        let rect = |c: [f64; 2], h: [f64; 2]| ConvexPolygon::rectangle(c, h).expect("valid rectangle");
        GraspScene {
            gripper: vec![
                rect([0.0, 0.0], [0.75, 0.125]),
                rect([-0.625, 0.5], [0.125, 0.375]),
                rect([0.625, 0.5], [0.125, 0.375]),
            ],
            nut: rect([0.0, 0.0], [0.25, 0.25]),
            acceptance: rect([0.0, 0.5], [0.3, 0.25]),
        }
    }

    /// Grid used for the standard task: 0.25 in x and y over [-3, 3], 20° in θ
    /// with cell centers at 0°, 20°, ..., 340°.
    pub fn standard_grid(spacing_xy: f64, spacing_theta: f64) -> Result<GridSpec> {
        GridSpec::new(vec![
            Axis::linear(-3.0, 3.0, spacing_xy),
            Axis::linear(-3.0, 3.0, spacing_xy),
            Axis::angle(-spacing_theta / 2.0, 360.0 - spacing_theta / 2.0, spacing_theta),
        ])
    }

    pub fn classify_pose(&self, x: f64, y: f64, theta_deg: f64) -> PoseClass {
        let theta = theta_deg.rem_euclid(360.0).to_radians();
        if self.gripper.iter().any(|g| g.transformed([x, y], theta).intersects(&self.nut)) {
            return PoseClass::Collision;
        }
        if self.acceptance.transformed([x, y], theta).contains(self.nut.centroid()) {
            PoseClass::Goal
        } else {
            PoseClass::Free
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseClass {
    Free,
    Collision,
    Goal,
}

pub fn grasp_cspace(scene: &GraspScene, grid: &GridSpec, obstacle_phi: f64, goal_phi: f64) -> Result<CSpaceMap> {
    if grid.dim() != 3 {
        return Err(Error::InvalidGrid(format!("grasp c-space needs (x, y, θ), got {} axes", grid.dim())));
    }
    let theta = grid.axis(2);
    if !theta.periodic {
        return Err(Error::InvalidGrid("θ axis must be periodic".into()));
    }
    if !theta.angular {
        return Err(Error::InvalidGrid("θ axis must be angular (degrees)".into()));
    }
    let cells = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let c = grid.center(i);
            match scene.classify_pose(c[0], c[1], c[2]) {
                PoseClass::Collision => CellClass::Obstacle(obstacle_phi),
                PoseClass::Goal => CellClass::Goal(goal_phi),
                PoseClass::Free if grid.is_boundary(i) => CellClass::Exterior(obstacle_phi),
                PoseClass::Free => CellClass::Free,
            }
        })
        .collect();
    CSpaceMap::new("grasp", grid.clone(), cells)
}
