//! Scene representation: triangle facets, EM materials, bounds and the
//! spatial index used for every ray query in the crate.
//!
//! Units are meters, coordinates are right-handed with +z up. A facet's
//! outward normal follows its counter-clockwise winding; room shells are
//! authored with normals facing the interior.

mod bvh;
mod io;

pub use bvh::{Hit, SpatialIndex};
pub use io::{load_scene, parse_scene, save_scene, scene_to_json, SCENE_FORMAT};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Point3<f64>;
pub type Vector = Vector3<f64>;

/// Self-intersection guard applied by default to every ray query.
pub const DEFAULT_T_MIN: f64 = 1e-6;

/// Minimum facet area in m² below which a triangle counts as degenerate.
pub const MIN_FACET_AREA: f64 = 1e-12;

/// Marker colors reserved for the transmitter and receiver in scene views.
pub const TX_COLOR: [u8; 3] = [255, 0, 0];
pub const RX_COLOR: [u8; 3] = [0, 0, 255];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// Relative permittivity (dimensionless, >= 1).
    pub relative_permittivity: f64,
    /// Conductivity in S/m (>= 0).
    pub conductivity: f64,
    pub render_color: [u8; 3],
}

impl Material {
    pub fn new(name: impl Into<String>, relative_permittivity: f64, conductivity: f64, render_color: [u8; 3]) -> Self {
        Material {
            name: name.into(),
            relative_permittivity,
            conductivity,
            render_color,
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let invalid = |reason: String| Error::Validation {
            element: "material",
            index,
            reason,
        };
        if !(self.relative_permittivity >= 1.0) || !self.relative_permittivity.is_finite() {
            return Err(invalid(format!(
                "relative permittivity {} must be finite and >= 1",
                self.relative_permittivity
            )));
        }
        if !(self.conductivity >= 0.0) || !self.conductivity.is_finite() {
            return Err(invalid(format!("conductivity {} must be finite and >= 0", self.conductivity)));
        }
        if self.render_color == TX_COLOR || self.render_color == RX_COLOR {
            return Err(invalid(format!(
                "render color {:?} is reserved for Tx/Rx markers",
                self.render_color
            )));
        }
        Ok(())
    }
}

/// A triangle with a material reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub vertices: [Point; 3],
    pub material_id: usize,
}

impl Facet {
    pub fn new(vertices: [Point; 3], material_id: usize) -> Self {
        Facet {
            vertices,
            material_id,
        }
    }

    fn cross(&self) -> Vector {
        let [a, b, c] = &self.vertices;
        (b - a).cross(&(c - a))
    }

    pub fn area(&self) -> f64 {
        0.5 * self.cross().norm()
    }

    /// Unit normal from the counter-clockwise winding.
    pub fn normal(&self) -> Vector {
        self.cross().normalize()
    }

    pub fn centroid(&self) -> Point {
        let [a, b, c] = &self.vertices;
        Point::from((a.coords + b.coords + c.coords) / 3.0)
    }

    /// Signed distance of `p` from the facet plane, positive on the normal side.
    pub fn signed_distance(&self, p: &Point) -> f64 {
        self.normal().dot(&(p - self.vertices[0]))
    }

    /// Mirror image of `p` across the facet plane.
    pub fn mirror(&self, p: &Point) -> Point {
        let n = self.normal();
        p - n * (2.0 * n.dot(&(p - self.vertices[0])))
    }

    /// Barycentric coordinates (w0, w1, w2) of a point assumed to lie on the plane.
    pub fn barycentric(&self, p: &Point) -> [f64; 3] {
        let [a, b, c] = &self.vertices;
        let v0 = b - a;
        let v1 = c - a;
        let v2 = p - a;
        let d00 = v0.dot(&v0);
        let d01 = v0.dot(&v1);
        let d11 = v1.dot(&v1);
        let d20 = v2.dot(&v0);
        let d21 = v2.dot(&v1);
        let denom = d00 * d11 - d01 * d01;
        let w1 = (d11 * d20 - d01 * d21) / denom;
        let w2 = (d00 * d21 - d01 * d20) / denom;
        [1.0 - w1 - w2, w1, w2]
    }

    /// Euclidean distance from `p` to the closest point of the triangle.
    pub fn distance_to(&self, p: &Point) -> f64 {
        (closest_point_on_triangle(p, &self.vertices) - p).norm()
    }

    /// Ray/triangle intersection (Möller-Trumbore). Returns the parametric
    /// distance for hits with barycentric coordinates inside the triangle
    /// (edges inclusive).
    pub fn intersect(&self, origin: &Point, direction: &Vector) -> Option<f64> {
        const EDGE_EPS: f64 = 1e-10;
        let [a, b, c] = &self.vertices;
        let e1 = b - a;
        let e2 = c - a;
        let p = direction.cross(&e2);
        let det = e1.dot(&p);
        if det.abs() < 1e-18 {
            return None;
        }
        let inv = 1.0 / det;
        let s = origin - a;
        let u = s.dot(&p) * inv;
        if u < -EDGE_EPS || u > 1.0 + EDGE_EPS {
            return None;
        }
        let q = s.cross(&e1);
        let v = direction.dot(&q) * inv;
        if v < -EDGE_EPS || u + v > 1.0 + EDGE_EPS {
            return None;
        }
        Some(e2.dot(&q) * inv)
    }
}

/// Closest point on triangle `tri` to `p` (Ericson, Real-Time Collision Detection).
fn closest_point_on_triangle(p: &Point, tri: &[Point; 3]) -> Point {
    let [a, b, c] = tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn grow(&mut self, p: &Point) {
        for i in 0..3 {
            self.min[i] = self.min[i].min(p[i]);
            self.max[i] = self.max[i].max(p[i]);
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        out.grow(&other.min);
        out.grow(&other.max);
        out
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn extent(&self) -> Vector {
        if self.is_empty() {
            Vector::zeros()
        } else {
            self.max - self.min
        }
    }

    pub fn center(&self) -> Point {
        if self.is_empty() {
            Point::origin()
        } else {
            nalgebra::center(&self.min, &self.max)
        }
    }
}

/// The simulation world: facets, their materials and derived bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub materials: Vec<Material>,
    facets: Vec<Facet>,
    bounds: Aabb,
}

impl Scene {
    /// Builds a scene and validates every invariant, naming the first
    /// offending element on failure.
    pub fn new(name: impl Into<String>, materials: Vec<Material>, facets: Vec<Facet>) -> Result<Self> {
        for (i, m) in materials.iter().enumerate() {
            m.validate(i)?;
        }
        let mut bounds = Aabb::empty();
        for (i, f) in facets.iter().enumerate() {
            if f.material_id >= materials.len() {
                return Err(Error::Validation {
                    element: "facet",
                    index: i,
                    reason: format!(
                        "material_id {} does not resolve ({} materials)",
                        f.material_id,
                        materials.len()
                    ),
                });
            }
            if f.vertices.iter().any(|v| !v.coords.iter().all(|c| c.is_finite())) {
                return Err(Error::Validation {
                    element: "facet",
                    index: i,
                    reason: "non-finite vertex coordinate".into(),
                });
            }
            let area = f.area();
            if !(area > MIN_FACET_AREA) {
                return Err(Error::Validation {
                    element: "facet",
                    index: i,
                    reason: format!("degenerate triangle (area {area:e} m²)"),
                });
            }
            for v in &f.vertices {
                bounds.grow(v);
            }
        }
        Ok(Scene {
            name: name.into(),
            materials,
            facets,
            bounds,
        })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Scene {
            name: name.into(),
            materials: Vec::new(),
            facets: Vec::new(),
            bounds: Aabb::empty(),
        }
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facet(&self, id: usize) -> Option<&Facet> {
        self.facets.get(id)
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn material_of(&self, facet_id: usize) -> Result<&Material> {
        let facet = self
            .facets
            .get(facet_id)
            .ok_or_else(|| Error::contract(format!("facet {facet_id} does not exist")))?;
        self.materials.get(facet.material_id).ok_or_else(|| Error::Validation {
            element: "facet",
            index: facet_id,
            reason: format!("material_id {} does not resolve", facet.material_id),
        })
    }

    /// Distance from `p` to the nearest facet, or infinity for an empty scene.
    pub fn clearance(&self, p: &Point) -> f64 {
        self.facets
            .iter()
            .map(|f| f.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn build_index(&self) -> SpatialIndex {
        SpatialIndex::build(self)
    }
}

/// Splits an authored quad (a, b, c, d) into triangles 0-1-2 and 0-2-3.
pub fn split_quad(quad: [Point; 4], material_id: usize) -> [Facet; 2] {
    let [a, b, c, d] = quad;
    [Facet::new([a, b, c], material_id), Facet::new([a, c, d], material_id)]
}
