//! Planar convex shapes and the separating-axis intersection test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

const MIN_AREA: f64 = 1e-12;

fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// A convex polygon with counter-clockwise winding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidGeometry(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite vertex".into()));
        }
        let poly = ConvexPolygon { vertices };
        let area = poly.signed_area();
        if area.abs() <= MIN_AREA {
            return Err(Error::InvalidGeometry(format!("degenerate polygon (area {area:e})")));
        }
        if area < 0.0 {
            return Err(Error::InvalidGeometry("polygon winding is clockwise".into()));
        }
        let n = poly.vertices.len();
        for i in 0..n {
            let a = poly.vertices[i];
            let b = poly.vertices[(i + 1) % n];
            let c = poly.vertices[(i + 2) % n];
            if cross(sub(b, a), sub(c, b)) < -1e-12 {
                return Err(Error::InvalidGeometry("polygon is not convex".into()));
            }
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle given by center and half extents.
    pub fn rectangle(center: Vec2, half: Vec2) -> Result<Self> {
        let [cx, cy] = center;
        let [hx, hy] = half;
        ConvexPolygon::new(vec![
            [cx - hx, cy - hy],
            [cx + hx, cy - hy],
            [cx + hx, cy + hy],
            [cx - hx, cy + hy],
        ])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| cross(self.vertices[i], self.vertices[(i + 1) % n]))
            .sum::<f64>()
            / 2.0
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len();
        let mut c = [0.0, 0.0];
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let w = cross(a, b);
            c[0] += (a[0] + b[0]) * w;
            c[1] += (a[1] + b[1]) * w;
        }
        let k = 6.0 * self.signed_area();
        [c[0] / k, c[1] / k]
    }

    /// Closed containment: points on an edge count as inside.
    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            cross(sub(b, a), sub(p, a)) >= 0.0
        })
    }

    /// Rigid transform: rotate by `theta` radians about the origin, then translate.
    pub fn transformed(&self, translation: Vec2, theta: f64) -> ConvexPolygon {
        let (s, c) = theta.sin_cos();
        let vertices = self
            .vertices
            .iter()
            .map(|&[x, y]| [c * x - s * y + translation[0], s * x + c * y + translation[1]])
            .collect();
        // Rotation preserves convexity and winding.
        ConvexPolygon { vertices }
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        self.vertices
            .iter()
            .map(|&v| dot(v, axis))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)))
    }

    fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Separating-axis test. Touching polygons count as intersecting.
    pub fn intersects(&self, other: &ConvexPolygon) -> bool {
        let (alo, ahi) = self.bounding_box();
        let (blo, bhi) = other.bounding_box();
        if (0..2).any(|k| ahi[k] < blo[k] || bhi[k] < alo[k]) {
            return false;
        }
        for poly in [self, other] {
            let n = poly.vertices.len();
            for i in 0..n {
                let e = sub(poly.vertices[(i + 1) % n], poly.vertices[i]);
                let axis = [-e[1], e[0]];
                let (amin, amax) = self.project(axis);
                let (bmin, bmax) = other.project(axis);
                if amax < bmin || bmax < amin {
                    return false;
                }
            }
        }
        true
    }
}

impl TryFrom<Vec<Vec2>> for ConvexPolygon {
    type Error = Error;

    fn try_from(vertices: Vec<Vec2>) -> Result<Self> {
        ConvexPolygon::new(vertices)
    }
}

impl From<ConvexPolygon> for Vec<Vec2> {
    fn from(poly: ConvexPolygon) -> Self {
        poly.vertices
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Rect { center: Vec2, half: Vec2 },
    Polygon(ConvexPolygon),
}

impl Shape {
    pub fn rect(center: Vec2, half: Vec2) -> Result<Shape> {
        if !(half[0] > 0.0 && half[1] > 0.0) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "rectangle needs finite center and positive half extents, got {half:?}"
            )));
        }
        Ok(Shape::Rect { center, half })
    }

    /// Rectangle from its lower-left and upper-right corners.
    pub fn rect_corners(lo: Vec2, hi: Vec2) -> Result<Shape> {
        Shape::rect(
            [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0],
            [(hi[0] - lo[0]) / 2.0, (hi[1] - lo[1]) / 2.0],
        )
    }

    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Shape::Rect { center, half } => {
                (p[0] - center[0]).abs() <= half[0] && (p[1] - center[1]).abs() <= half[1]
            }
            Shape::Polygon(poly) => poly.contains(p),
        }
    }

    pub fn to_polygon(&self) -> ConvexPolygon {
        match self {
            Shape::Rect { center, half } => ConvexPolygon::rectangle(*center, *half)
                .expect("validated rectangle is a valid polygon"),
            Shape::Polygon(poly) => poly.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Obstacle,
    Goal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedShape {
    pub shape: Shape,
    pub role: Role,
    /// Obstacle penalty; `None` falls back to the rasterizer's default.
    pub phi: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapeSet {
    pub shapes: Vec<TaggedShape>,
}

impl ShapeSet {
    pub fn new() -> Self {
        ShapeSet::default()
    }

    pub fn obstacle(mut self, shape: Shape) -> Self {
        self.shapes.push(TaggedShape { shape, role: Role::Obstacle, phi: None });
        self
    }

    pub fn obstacle_with_phi(mut self, shape: Shape, phi: f64) -> Self {
        self.shapes.push(TaggedShape { shape, role: Role::Obstacle, phi: Some(phi) });
        self
    }

    pub fn goal(mut self, shape: Shape) -> Self {
        self.shapes.push(TaggedShape { shape, role: Role::Goal, phi: None });
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = &TaggedShape> {
        self.shapes.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(cx: f64, cy: f64, h: f64) -> ConvexPolygon {
        ConvexPolygon::rectangle([cx, cy], [h, h]).unwrap()
    }

    #[test]
    fn rejects_bad_polygons() {
        assert!(ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        // clockwise
        assert!(ConvexPolygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
        // collinear
        assert!(ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
        // non-convex dart
        let dart = vec![[0.0, 0.0], [2.0, 0.0], [1.0, 0.3], [1.0, 2.0]];
        assert!(ConvexPolygon::new(dart).is_err());
    }

    #[test]
    fn centroid_and_containment() {
        let sq = square(1.0, -2.0, 0.5);
        let c = sq.centroid();
        assert!((c[0] - 1.0).abs() < 1e-12 && (c[1] + 2.0).abs() < 1e-12);
        assert!(sq.contains([1.5, -2.0]));
        assert!(!sq.contains([1.51, -2.0]));
    }

    #[test]
    fn sat_basic_cases() {
        let a = square(0.0, 0.0, 1.0);
        assert!(a.intersects(&square(1.5, 0.0, 1.0)));
        assert!(a.intersects(&square(2.0, 0.0, 1.0)), "touching counts");
        assert!(!a.intersects(&square(2.1, 0.0, 1.0)));
        // rotated square whose bounding box overlaps but a diagonal axis separates
        let diamond = square(0.0, 0.0, 0.5).transformed([1.6, 1.6], std::f64::consts::FRAC_PI_4);
        assert!(!a.intersects(&diamond));
        let closer = square(0.0, 0.0, 0.5).transformed([1.3, 1.3], std::f64::consts::FRAC_PI_4);
        assert!(a.intersects(&closer));
    }

    fn arb_polygon() -> impl Strategy<Value = ConvexPolygon> {
        (
            -3.0..3.0f64,
            -3.0..3.0f64,
            0.2..2.0f64,
            prop::collection::vec(0.0..std::f64::consts::TAU, 3..8),
        )
            .prop_filter_map("degenerate", |(cx, cy, r, mut angles)| {
                angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
                angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
                let verts = angles
                    .iter()
                    .map(|t| [cx + r * t.cos(), cy + r * t.sin()])
                    .collect();
                ConvexPolygon::new(verts).ok()
            })
    }

    proptest! {
        #[test]
        fn sat_is_symmetric(a in arb_polygon(), b in arb_polygon()) {
            prop_assert_eq!(a.intersects(&b), b.intersects(&a));
        }

        #[test]
        fn shared_vertex_implies_intersection(a in arb_polygon(), b in arb_polygon()) {
            if a.contains(b.vertices()[0]) {
                prop_assert!(a.intersects(&b));
            }
        }
    }
}
