//! Bounding-volume hierarchy over scene facets.
//!
//! Built once per scene by median splits on the longest centroid axis, then
//! shared read-only. Box tests are padded so the hierarchy never prunes a
//! facet the brute-force scan would hit; both paths run the same triangle
//! kernel and the same tie-break, which makes their answers identical.

use super::{Aabb, Facet, Point, Scene, Vector};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 4;

/// First-hit result of a ray query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub facet_id: usize,
    pub distance: f64,
    pub point: Point,
    pub normal: Vector,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, count: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Immutable acceleration structure answering first-hit and any-hit queries.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    facets: Vec<Facet>,
    normals: Vec<Vector>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Two hits closer than this (relative to distance) are a tie.
fn tie_eps(t: f64) -> f64 {
    1e-12 * t.abs().max(1.0)
}

/// True when a hit at `t` with id `id` beats the current best.
fn better(t: f64, id: usize, best: Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((bt, bid)) => t < bt - tie_eps(bt) || ((t - bt).abs() <= tie_eps(bt) && id < bid),
    }
}

fn check_direction(direction: &Vector) -> Result<()> {
    let n = direction.norm();
    if (n - 1.0).abs() >= 1e-9 || !n.is_finite() {
        return Err(Error::contract(format!("ray direction must be unit length (|d| = {n})")));
    }
    Ok(())
}

impl SpatialIndex {
    pub fn build(scene: &Scene) -> Self {
        let facets = scene.facets().to_vec();
        let normals = facets.iter().map(Facet::normal).collect();
        let mut order: Vec<usize> = (0..facets.len()).collect();
        let mut nodes = Vec::new();
        if !facets.is_empty() {
            let boxes: Vec<Aabb> = facets.iter().map(facet_box).collect();
            let centroids: Vec<Point> = facets.iter().map(Facet::centroid).collect();
            build_node(&boxes, &centroids, &mut order, 0, facets.len(), &mut nodes);
        }
        SpatialIndex {
            facets,
            normals,
            order,
            nodes,
        }
    }

    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }

    pub fn facet(&self, id: usize) -> &Facet {
        &self.facets[id]
    }

    pub fn normal(&self, id: usize) -> Vector {
        self.normals[id]
    }

    /// Nearest hit with distance in `(t_min, t_max)`; ties go to the lowest facet id.
    pub fn intersect_first(&self, origin: &Point, direction: &Vector, t_min: f64, t_max: f64) -> Result<Option<Hit>> {
        check_direction(direction)?;
        Ok(self.first_hit_filtered(origin, direction, t_min, t_max, |_| true))
    }

    /// Unchecked first-hit query skipping facets for which `keep` is false.
    pub(crate) fn first_hit_filtered(
        &self,
        origin: &Point,
        direction: &Vector,
        t_min: f64,
        t_max: f64,
        keep: impl Fn(usize) -> bool,
    ) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = inverse(direction);
        let mut best: Option<(f64, usize)> = None;
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            let limit = best.map_or(t_max, |(bt, _)| (bt + tie_eps(bt)).min(t_max));
            if slab(node.bounds(), origin, &inv, t_min, limit).is_none() {
                continue;
            }
            match node {
                Node::Leaf { start, count, .. } => {
                    for &fid in &self.order[*start..*start + *count] {
                        if !keep(fid) {
                            continue;
                        }
                        if let Some(t) = self.facets[fid].intersect(origin, direction) {
                            if t > t_min && t < t_max && better(t, fid, best) {
                                best = Some((t, fid));
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = slab(self.nodes[*left].bounds(), origin, &inv, t_min, limit);
                    let dr = slab(self.nodes[*right].bounds(), origin, &inv, t_min, limit);
                    match (dl, dr) {
                        (Some(a), Some(b)) => {
                            if a <= b {
                                stack.push(*right);
                                stack.push(*left);
                            } else {
                                stack.push(*left);
                                stack.push(*right);
                            }
                        }
                        (Some(_), None) => stack.push(*left),
                        (None, Some(_)) => stack.push(*right),
                        (None, None) => {}
                    }
                }
            }
        }
        best.map(|(t, fid)| self.make_hit(origin, direction, t, fid))
    }

    /// True if any facet other than those in `skip` is hit in `(t_min, t_max)`.
    pub fn occluded(&self, origin: &Point, direction: &Vector, t_min: f64, t_max: f64, skip: &[usize]) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let inv = inverse(direction);
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if slab(node.bounds(), origin, &inv, t_min, t_max).is_none() {
                continue;
            }
            match node {
                Node::Leaf { start, count, .. } => {
                    for &fid in &self.order[*start..*start + *count] {
                        if skip.contains(&fid) {
                            continue;
                        }
                        if let Some(t) = self.facets[fid].intersect(origin, direction) {
                            if t > t_min && t < t_max {
                                return true;
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(*left);
                    stack.push(*right);
                }
            }
        }
        false
    }

    /// Reference scan over every facet; same kernel and tie-break as the hierarchy.
    pub fn intersect_brute_force(&self, origin: &Point, direction: &Vector, t_min: f64, t_max: f64) -> Option<Hit> {
        let mut best: Option<(f64, usize)> = None;
        for (fid, f) in self.facets.iter().enumerate() {
            if let Some(t) = f.intersect(origin, direction) {
                if t > t_min && t < t_max && better(t, fid, best) {
                    best = Some((t, fid));
                }
            }
        }
        best.map(|(t, fid)| self.make_hit(origin, direction, t, fid))
    }

    fn make_hit(&self, origin: &Point, direction: &Vector, t: f64, fid: usize) -> Hit {
        Hit {
            facet_id: fid,
            distance: t,
            point: origin + direction * t,
            normal: self.normals[fid],
        }
    }
}

fn facet_box(f: &Facet) -> Aabb {
    let mut b = Aabb::empty();
    for v in &f.vertices {
        b.grow(v);
    }
    // Pad so that edge-inclusive triangle hits are never pruned.
    let pad = 1e-9 * (1.0 + b.extent().amax());
    for i in 0..3 {
        b.min[i] -= pad;
        b.max[i] += pad;
    }
    b
}

fn build_node(
    boxes: &[Aabb],
    centroids: &[Point],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &i in &order[start..end] {
        bounds = bounds.union(&boxes[i]);
        cbounds.grow(&centroids[i]);
    }
    let count = end - start;
    let index = nodes.len();
    let extent = cbounds.extent();
    if count <= LEAF_SIZE || extent.amax() <= 0.0 {
        nodes.push(Node::Leaf { bounds, start, count });
        return index;
    }
    let axis = extent.imax();
    // Stable order by (centroid, facet id) keeps the build deterministic.
    order[start..end].sort_by(|&a, &b| {
        centroids[a][axis]
            .partial_cmp(&centroids[b][axis])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mid = start + count / 2;
    nodes.push(Node::Leaf { bounds, start, count });
    let left = build_node(boxes, centroids, order, start, mid, nodes);
    let right = build_node(boxes, centroids, order, mid, end, nodes);
    nodes[index] = Node::Inner { bounds, left, right };
    index
}

fn inverse(d: &Vector) -> Vector {
    Vector::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z)
}

/// Slab test; returns the entry distance when the box overlaps `(t_min, t_max)`.
fn slab(b: &Aabb, origin: &Point, inv: &Vector, t_min: f64, t_max: f64) -> Option<f64> {
    let mut lo = t_min;
    let mut hi = t_max;
    for i in 0..3 {
        if inv[i].is_infinite() {
            if origin[i] < b.min[i] || origin[i] > b.max[i] {
                return None;
            }
            continue;
        }
        let t0 = (b.min[i] - origin[i]) * inv[i];
        let t1 = (b.max[i] - origin[i]) * inv[i];
        let (near, far) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        lo = lo.max(near);
        hi = hi.min(far);
        if lo > hi {
            return None;
        }
    }
    Some(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{split_quad, Material};

    fn floor_scene() -> Scene {
        let q = [
            Point::new(0.0, 0.0, 0.0),
            Point::new(2.0, 0.0, 0.0),
            Point::new(2.0, 2.0, 0.0),
            Point::new(0.0, 2.0, 0.0),
        ];
        Scene::new("floor", vec![Material::new("m", 4.0, 0.0, [9, 9, 9])], split_quad(q, 0).to_vec()).unwrap()
    }

    #[test]
    fn empty_scene_reports_no_hits() {
        let idx = Scene::empty("e").build_index();
        let hit = idx
            .intersect_first(&Point::origin(), &Vector::z(), 0.0, f64::INFINITY)
            .unwrap();
        assert!(hit.is_none());
        assert!(!idx.occluded(&Point::origin(), &Vector::z(), 0.0, 10.0, &[]));
    }

    #[test]
    fn rejects_unnormalized_direction() {
        let idx = floor_scene().build_index();
        let r = idx.intersect_first(&Point::origin(), &Vector::new(0.0, 0.0, 2.0), 0.0, 1.0);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn shared_edge_graze_breaks_tie_on_lowest_id() {
        // The diagonal (0,0)-(2,2) is shared by both halves of the quad.
        let idx = floor_scene().build_index();
        let origin = Point::new(1.0, 1.0, 1.0);
        let hit = idx.intersect_first(&origin, &-Vector::z(), 1e-6, 10.0).unwrap().unwrap();
        assert_eq!(hit.facet_id, 0);
        assert!((hit.distance - 1.0).abs() < 1e-15);
        let bf = idx.intersect_brute_force(&origin, &-Vector::z(), 1e-6, 10.0).unwrap();
        assert_eq!(bf.facet_id, 0);
    }

    #[test]
    fn t_min_guards_self_intersection() {
        let idx = floor_scene().build_index();
        let origin = Point::new(0.5, 1.5, 0.0);
        assert!(idx.intersect_first(&origin, &Vector::z(), 1e-6, 10.0).unwrap().is_none());
        assert!(idx
            .intersect_first(&Point::new(0.5, 1.5, 1e-7), &-Vector::z(), 1e-6, 10.0)
            .unwrap()
            .is_none());
    }

    #[test]
    fn parallel_ray_misses() {
        let idx = floor_scene().build_index();
        let hit = idx
            .intersect_first(&Point::new(-1.0, 1.0, 0.5), &Vector::x(), 0.0, f64::INFINITY)
            .unwrap();
        assert!(hit.is_none());
    }
}
