//! 3D paths from three orthographic path images.
//!
//! [`extract_segments`] turns one grayscale view into straight 2D segments,
//! [`bind_views`] lifts segments seen in two views sharing an axis into 3D
//! and chains them into polylines, and [`match_paths`] scores a
//! reconstruction against traced ground truth.

mod bind;
mod extract;
mod matching;

pub use bind::{bind_views, BindFlag, BindResult};
pub use extract::{extract_segments, prune_staircases, zhang_suen_thin};
pub use matching::{hausdorff, match_paths, match_polylines, Assignment, PathMatchReport};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Point;
use crate::tracer::PathRecord;
use crate::views::{PathView, PathViewSet, ViewConfig};

pub type Polyline = Vec<Point>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clarity {
    Clear,
    Blurred,
}

/// A straight stroke in one view, endpoints in continuous pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment2D {
    pub view: PathView,
    pub endpoints: [[f64; 2]; 2],
    /// Mean peak stroke intensity in [0, 1].
    pub mean_intensity: f64,
    pub clarity: Clarity,
}

impl Segment2D {
    pub fn length(&self) -> f64 {
        dist2(self.endpoints[0], self.endpoints[1])
    }

    pub fn is_clear(&self) -> bool {
        self.clarity == Clarity::Clear
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructConfig {
    /// Binarization level as a fraction of full scale.
    pub threshold: f64,
    /// Douglas-Peucker tolerance for splitting strokes, px.
    pub max_deviation_px: f64,
    pub min_segment_px: f64,
    /// Mean stroke intensity at or above which a segment is clear.
    pub clarity_threshold: f64,
    /// Arms at a junction this close to antiparallel are re-merged, degrees.
    pub merge_angle_deg: f64,
    /// Largest third-view disagreement accepted when binding, px.
    pub disagreement_cap_px: f64,
    /// Endpoint distance under which bound segments are chained, px.
    pub chain_tolerance_px: f64,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig {
            threshold: 0.15,
            max_deviation_px: 1.5,
            min_segment_px: 2.0,
            clarity_threshold: 0.5,
            merge_angle_deg: 4.0,
            disagreement_cap_px: 3.0,
            chain_tolerance_px: 2.0,
        }
    }
}

/// Extracts all three views and binds them; see [`bind_views`] for `terminals`.
pub fn reconstruct_views(views: &PathViewSet, config: &ReconstructConfig, terminals: &[Point]) -> Result<BindResult> {
    let size = views.config.image_size;
    if views.images.len() != 3 || views.images.iter().any(|i| i.width() != size || i.height() != size) {
        return Err(crate::error::Error::contract(format!(
            "path views must be three {size}×{size} images"
        )));
    }
    let seg = |v: PathView| extract_segments(views.image(v), v, config);
    bind_views(&seg(PathView::Xy), &seg(PathView::Xz), &seg(PathView::Yz), &views.config, config, terminals)
}

/// Whether every pair of projected segments of `paths` stays at least
/// `min_px` apart in every view. Near a vertex two segments share (Tx, Rx,
/// or a path's own bend) distances within `2·min_px` of that vertex are
/// not checked, so every segment must also project to at least `2·min_px`
/// in some view.
pub fn well_separated(paths: &[PathRecord], config: &ViewConfig, min_px: f64) -> bool {
    let polylines: Vec<&[Point]> = paths.iter().map(|p| p.vertices.as_slice()).collect();
    well_separated_polylines(&polylines, config, min_px)
}

/// [`well_separated`] on bare vertex lists.
pub fn well_separated_polylines(paths: &[&[Point]], config: &ViewConfig, min_px: f64) -> bool {
    let long_enough = paths.iter().flat_map(|p| p.windows(2)).all(|w| {
        PathView::ALL.iter().any(|v| {
            let axes = v.axes();
            dist2(config.to_pixel(axes, &w[0]), config.to_pixel(axes, &w[1])) >= 2.0 * min_px
        })
    });
    long_enough && PathView::ALL.iter().all(|&view| {
        let segs: Vec<[[f64; 2]; 2]> = paths
            .iter()
            .flat_map(|p| {
                p.windows(2)
                    .map(move |w| [config.to_pixel(view.axes(), &w[0]), config.to_pixel(view.axes(), &w[1])])
            })
            .collect();
        let exclusion = 2.0 * min_px;
        for i in 0..segs.len() {
            for j in 0..segs.len() {
                if i != j && !segment_clear_of(segs[i], segs[j], min_px, exclusion) {
                    return false;
                }
            }
        }
        true
    })
}

/// Greedy subset of `paths` (in the given order) that stays well separated.
pub fn well_separated_subset(paths: &[PathRecord], config: &ViewConfig, min_px: f64) -> Vec<PathRecord> {
    let mut kept: Vec<PathRecord> = Vec::new();
    for p in paths {
        kept.push(p.clone());
        if !well_separated(&kept, config, min_px) {
            kept.pop();
        }
    }
    kept
}

fn segment_clear_of(a: [[f64; 2]; 2], b: [[f64; 2]; 2], min_px: f64, exclusion: f64) -> bool {
    let shared: Vec<[f64; 2]> = a
        .iter()
        .filter(|p| b.iter().any(|q| dist2(**p, *q) < 1e-6))
        .copied()
        .collect();
    let len = dist2(a[0], a[1]);
    let steps = (len / 0.5).ceil().max(1.0) as usize;
    (0..=steps).all(|k| {
        let t = k as f64 / steps as f64;
        let p = lerp2(a[0], a[1], t);
        shared.iter().any(|s| dist2(p, *s) < exclusion) || point_segment_distance(p, b[0], b[1]) >= min_px
    })
}

pub(crate) fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn lerp2(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}

pub(crate) fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist2(p, lerp2(a, b, t))
}

/// Drops interior vertices where the polyline turns by less than `angle_deg`.
pub fn simplify_polyline(poly: &[Point], angle_deg: f64) -> Polyline {
    if poly.len() <= 2 {
        return poly.to_vec();
    }
    let cos_limit = angle_deg.to_radians().cos();
    let mut out = vec![poly[0]];
    for i in 1..poly.len() - 1 {
        let prev = *out.last().expect("non-empty");
        let a = poly[i] - prev;
        let b = poly[i + 1] - poly[i];
        let (na, nb) = (a.norm(), b.norm());
        if na < 1e-12 || nb < 1e-12 {
            continue;
        }
        if a.dot(&b) / (na * nb) < cos_limit {
            out.push(poly[i]);
        }
    }
    out.push(*poly.last().expect("len > 2"));
    out
}
