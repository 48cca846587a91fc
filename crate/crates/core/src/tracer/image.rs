//! Exact specular paths by the image method.

use rayon::prelude::*;

use super::{check_pair, find_los_with, Interaction, InteractionKind, PathRecord, TraceConfig};
use crate::error::Result;
use crate::geometry::{Point, Scene, SpatialIndex};

/// Reflection points must sit at least this far inside their facet (barycentric).
const BARYCENTRIC_MARGIN: f64 = 1e-9;
/// Distance below which a point counts as lying on a facet plane.
const PLANE_EPS: f64 = 1e-9;

/// All specular paths of order `0..=config.max_order`, sorted by length.
///
/// Facets reflect on their normal side only. A sequence is pruned as soon as
/// an image source falls on or behind the next facet plane, or the next facet
/// lies entirely behind the previous one.
pub fn image_method_paths(
    scene: &Scene,
    index: &SpatialIndex,
    tx: &Point,
    rx: &Point,
    config: &TraceConfig,
) -> Result<Vec<PathRecord>> {
    config.validate()?;
    check_pair(tx, rx)?;
    let _ = scene;
    let mut paths = Vec::new();
    if let Some(los) = find_los_with(index, tx, rx, config.t_min, config.speed_of_light)? {
        paths.push(los);
    }
    if config.max_order > 0 {
        let search = Search { index, tx, rx, config };
        let reflected: Vec<PathRecord> = (0..index.facet_count())
            .into_par_iter()
            .flat_map_iter(|first| {
                let mut found = Vec::new();
                let mut seq = Vec::with_capacity(config.max_order);
                let mut images = Vec::with_capacity(config.max_order + 1);
                images.push(*tx);
                search.extend(first, &mut seq, &mut images, &mut found);
                found
            })
            .collect();
        paths.extend(reflected);
    }
    paths.sort_by(|a, b| {
        a.length
            .partial_cmp(&b.length)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.facet_sequence().cmp(&b.facet_sequence()))
    });
    Ok(paths)
}

struct Search<'a> {
    index: &'a SpatialIndex,
    tx: &'a Point,
    rx: &'a Point,
    config: &'a TraceConfig,
}

impl Search<'_> {
    /// Depth-first extension of `seq` by `facet`, recording valid paths.
    fn extend(&self, facet: usize, seq: &mut Vec<usize>, images: &mut Vec<Point>, found: &mut Vec<PathRecord>) {
        let f = self.index.facet(facet);
        let source = *images.last().expect("images start with tx");
        if f.signed_distance(&source) <= PLANE_EPS {
            return;
        }
        if let Some(&prev) = seq.last() {
            let pf = self.index.facet(prev);
            if !f.vertices.iter().any(|v| pf.signed_distance(v) > PLANE_EPS) {
                return;
            }
        }
        seq.push(facet);
        images.push(f.mirror(&source));
        if let Some(path) = self.validate(seq, images) {
            found.push(path);
        }
        if seq.len() < self.config.max_order {
            for next in 0..self.index.facet_count() {
                if next != facet {
                    self.extend(next, seq, images, found);
                }
            }
        }
        seq.pop();
        images.pop();
    }

    /// Back-traces the candidate from rx through the image chain.
    fn validate(&self, seq: &[usize], images: &[Point]) -> Option<PathRecord> {
        let k = seq.len();
        let mut points = vec![Point::origin(); k];
        let mut target = *self.rx;
        for j in (0..k).rev() {
            let f = self.index.facet(seq[j]);
            let image = images[j + 1];
            let d_target = f.signed_distance(&target);
            let d_image = f.signed_distance(&image);
            if d_target <= PLANE_EPS || d_image >= -PLANE_EPS {
                return None;
            }
            let s = d_target / (d_target - d_image);
            let p = target + (image - target) * s;
            if f.barycentric(&p).iter().any(|&w| w < BARYCENTRIC_MARGIN) {
                return None;
            }
            points[j] = p;
            target = p;
        }

        let mut vertices = Vec::with_capacity(k + 2);
        vertices.push(*self.tx);
        vertices.extend_from_slice(&points);
        vertices.push(*self.rx);

        let t_min = self.config.t_min;
        for (w, pair) in vertices.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            let len = (b - a).norm();
            if len <= 2.0 * t_min {
                return None;
            }
            let dir = (b - a) / len;
            let mut skip = [usize::MAX; 2];
            if w > 0 {
                skip[0] = seq[w - 1];
            }
            if w < k {
                skip[1] = seq[w];
            }
            if self.index.occluded(&a, &dir, t_min, len - t_min, &skip) {
                return None;
            }
        }

        let mut interactions = Vec::with_capacity(k);
        for j in 0..k {
            let incoming = (vertices[j + 1] - vertices[j]).normalize();
            let cos = -incoming.dot(&self.index.normal(seq[j]));
            if !(cos > 1e-12) {
                return None;
            }
            interactions.push(Interaction {
                kind: InteractionKind::Reflection,
                facet_id: seq[j],
                point: vertices[j + 1],
                incidence_angle: cos.min(1.0).acos(),
            });
        }
        Some(PathRecord::from_vertices(vertices, interactions, self.config.speed_of_light))
    }
}
