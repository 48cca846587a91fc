//! Shooting-and-bouncing-rays cross-check.
//!
//! Rays leave the transmitter in a Fibonacci-sphere arrangement and reflect
//! specularly. A ray segment registers a path when it passes the receiver
//! within the reception-sphere radius `r = L·Δα/√3·scale`, with `L` the
//! unfolded length and `Δα = √(4π/N)`.
//!
//! Registrations are merged per sequence of *surfaces*: facets on one
//! oriented plane (the two halves of an authored quad, say) count as one
//! reflector, so a ray tube straddling a quad diagonal yields one path. The
//! merged path keeps the facet sequence and geometry of its closest-approach
//! ray.
//!
//! With `sbr_refine` the closest-approach ray of every surface sequence is
//! steered onto rx by Gauss-Newton on its launch direction, then re-traced
//! through the BVH. Sequences whose refined ray is blocked or leaves the
//! surfaces are dropped; this removes the reception-sphere false positives
//! near edges and occluders.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{check_pair, Interaction, InteractionKind, PathRecord, TraceConfig};
use crate::error::Result;
use crate::geometry::{Point, Scene, SpatialIndex, Vector};

const CHUNK: usize = 4096;
const REFINE_ITERATIONS: usize = 30;
const REFINE_TOLERANCE: f64 = 1e-10;

/// Deterministic, near-uniform unit directions (golden-angle spiral).
pub fn fibonacci_directions(n: usize) -> impl Iterator<Item = Vector> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n).map(move |i| fibonacci_direction(i, n, golden))
}

fn fibonacci_direction(i: usize, n: usize, golden: f64) -> Vector {
    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = golden * i as f64;
    Vector::new(r * phi.cos(), r * phi.sin(), z)
}

/// Angular spacing between adjacent launched rays, radians.
pub fn angular_spacing(n: usize) -> f64 {
    (4.0 * std::f64::consts::PI / n as f64).sqrt()
}

/// Surface id per facet: the lowest facet id lying on the same oriented
/// plane. The specular point on a plane is unique for a given image chain,
/// so a sequence of planes identifies at most one path.
pub fn surface_ids(index: &SpatialIndex) -> Vec<usize> {
    let n = index.facet_count();
    let mut ids: Vec<usize> = (0..n).collect();
    for b in 0..n {
        let nb = index.normal(b);
        let fb = index.facet(b);
        for a in 0..b {
            if ids[a] != a || index.normal(a).dot(&nb) < 1.0 - 1e-9 {
                continue;
            }
            let fa = index.facet(a);
            if fb.vertices.iter().all(|v| fa.signed_distance(v).abs() <= 1e-9) {
                ids[b] = a;
                break;
            }
        }
    }
    ids
}

#[derive(Clone)]
struct Capture {
    distance: f64,
    ray: usize,
    launch: Vector,
    facets: Vec<usize>,
    points: Vec<Point>,
    normals: Vec<Vector>,
}

impl Capture {
    fn beats(&self, other: &Capture) -> bool {
        (self.distance, self.ray) < (other.distance, other.ray)
    }
}

/// Approximate paths found by ray launching, sorted by length.
pub fn sbr_trace(
    scene: &Scene,
    index: &SpatialIndex,
    tx: &Point,
    rx: &Point,
    config: &TraceConfig,
) -> Result<Vec<PathRecord>> {
    config.validate()?;
    check_pair(tx, rx)?;
    let _ = scene;
    let n = config.sbr_ray_count;
    if n == 0 {
        return Ok(Vec::new());
    }
    let surfaces = surface_ids(index);
    let radius_per_meter = angular_spacing(n) / 3f64.sqrt() * config.sbr_capture_scale;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());

    let chunks: Vec<BTreeMap<Vec<usize>, Capture>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut best: BTreeMap<Vec<usize>, Capture> = BTreeMap::new();
            for ray in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let dir = fibonacci_direction(ray, n, golden);
                shoot(index, tx, rx, dir, ray, radius_per_meter, config, &surfaces, &mut best);
            }
            best
        })
        .collect();

    let mut merged: BTreeMap<Vec<usize>, Capture> = BTreeMap::new();
    for chunk in chunks {
        for (key, cap) in chunk {
            match merged.get(&key) {
                Some(existing) if !cap.beats(existing) => {}
                _ => {
                    merged.insert(key, cap);
                }
            }
        }
    }

    let mut paths: Vec<PathRecord> = merged
        .into_iter()
        .filter_map(|(key, cap)| {
            if config.sbr_refine {
                refine(index, &surfaces, tx, rx, &key, &cap, config)
            } else {
                Some(raw_record(tx, rx, &cap, config))
            }
        })
        .collect();
    paths.sort_by(|a, b| {
        a.length
            .partial_cmp(&b.length)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.facet_sequence().cmp(&b.facet_sequence()))
    });
    Ok(paths)
}

fn raw_record(tx: &Point, rx: &Point, cap: &Capture, config: &TraceConfig) -> PathRecord {
    let mut vertices = Vec::with_capacity(cap.points.len() + 2);
    vertices.push(*tx);
    vertices.extend_from_slice(&cap.points);
    vertices.push(*rx);
    let interactions = cap
        .facets
        .iter()
        .enumerate()
        .map(|(k, &facet_id)| {
            let incoming = (vertices[k + 1] - vertices[k]).normalize();
            let cos = (-incoming.dot(&cap.normals[k])).clamp(0.0, 1.0);
            Interaction {
                kind: InteractionKind::Reflection,
                facet_id,
                point: vertices[k + 1],
                incidence_angle: cos.acos().min(std::f64::consts::FRAC_PI_2 - 1e-12),
            }
        })
        .collect();
    PathRecord::from_vertices(vertices, interactions, config.speed_of_light)
}

/// Closest-approach offset from rx of a ray launched along `dir` and
/// mirrored by the unbounded planes in order.
fn unfolded_miss(tx: &Point, rx: &Point, dir: &Vector, planes: &[(Point, Vector)]) -> Option<Vector> {
    let mut origin = *tx;
    let mut dir = *dir;
    for (p0, n) in planes {
        let denom = dir.dot(n);
        if denom >= 0.0 {
            return None;
        }
        let t = (p0 - origin).dot(n) / denom;
        if t <= 0.0 {
            return None;
        }
        origin += dir * t;
        dir -= n * (2.0 * dir.dot(n));
    }
    let w = rx - origin;
    let along = w.dot(&dir);
    if along <= 0.0 {
        return None;
    }
    Some(w - dir * along)
}

/// Gauss-Newton on the launch direction until the ray passes through rx,
/// then a BVH re-trace that must reproduce the surface sequence unblocked.
fn refine(
    index: &SpatialIndex,
    surfaces: &[usize],
    tx: &Point,
    rx: &Point,
    key: &[usize],
    cap: &Capture,
    config: &TraceConfig,
) -> Option<PathRecord> {
    let planes: Vec<(Point, Vector)> = cap
        .facets
        .iter()
        .map(|&f| (index.facet(f).vertices[0], index.normal(f)))
        .collect();
    let d0 = cap.launch;
    let helper = if d0.x.abs() < 0.9 { Vector::x() } else { Vector::y() };
    let e1 = d0.cross(&helper).normalize();
    let e2 = d0.cross(&e1);
    let dir_at = |u: [f64; 2]| (d0 + e1 * u[0] + e2 * u[1]).normalize();

    let mut u = [0.0, 0.0];
    let mut converged = false;
    for _ in 0..REFINE_ITERATIONS {
        let r = unfolded_miss(tx, rx, &dir_at(u), &planes)?;
        if r.norm() <= REFINE_TOLERANCE {
            converged = true;
            break;
        }
        let h = 1e-7;
        let mut jac = [Vector::zeros(); 2];
        for (axis, col) in jac.iter_mut().enumerate() {
            let mut up = u;
            let mut dn = u;
            up[axis] += h;
            dn[axis] -= h;
            *col = (unfolded_miss(tx, rx, &dir_at(up), &planes)? - unfolded_miss(tx, rx, &dir_at(dn), &planes)?) / (2.0 * h);
        }
        let (a, b, c) = (jac[0].dot(&jac[0]), jac[0].dot(&jac[1]), jac[1].dot(&jac[1]));
        let (g0, g1) = (-jac[0].dot(&r), -jac[1].dot(&r));
        let det = a * c - b * b;
        if det.abs() < 1e-300 {
            return None;
        }
        u[0] += (c * g0 - b * g1) / det;
        u[1] += (a * g1 - b * g0) / det;
    }
    if !converged {
        return None;
    }

    let t_min = config.t_min;
    let mut origin = *tx;
    let mut dir = dir_at(u);
    let mut vertices = vec![*tx];
    let mut interactions = Vec::with_capacity(key.len());
    for &surface in key {
        let hit = index.first_hit_filtered(&origin, &dir, t_min, f64::INFINITY, |_| true)?;
        let cos = dir.dot(&hit.normal);
        if surfaces[hit.facet_id] != surface || !(cos < -1e-12) {
            return None;
        }
        interactions.push(Interaction {
            kind: InteractionKind::Reflection,
            facet_id: hit.facet_id,
            point: hit.point,
            incidence_angle: (-cos).min(1.0).acos(),
        });
        vertices.push(hit.point);
        dir = (dir - hit.normal * (2.0 * cos)).normalize();
        origin = hit.point;
    }
    let w = rx - origin;
    let along = w.dot(&dir);
    if along <= 2.0 * t_min || (w - dir * along).norm() > 1e-7 {
        return None;
    }
    if index.occluded(&origin, &dir, t_min, along - t_min, &[]) {
        return None;
    }
    vertices.push(*rx);
    Some(PathRecord::from_vertices(vertices, interactions, config.speed_of_light))
}

#[allow(clippy::too_many_arguments)]
fn shoot(
    index: &SpatialIndex,
    tx: &Point,
    rx: &Point,
    launch: Vector,
    ray: usize,
    radius_per_meter: f64,
    config: &TraceConfig,
    surfaces: &[usize],
    best: &mut BTreeMap<Vec<usize>, Capture>,
) {
    let mut origin = *tx;
    let mut dir = launch;
    let mut travelled = 0.0;
    let mut facets = Vec::new();
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for bounce in 0..=config.sbr_max_bounces {
        let hit = index.first_hit_filtered(&origin, &dir, config.t_min, f64::INFINITY, |_| true);
        let end = hit.map_or(f64::INFINITY, |h| h.distance);

        let to_rx = rx - origin;
        let along = to_rx.dot(&dir);
        if along > 0.0 && along < end {
            let miss = (to_rx - dir * along).norm();
            if miss <= (travelled + along) * radius_per_meter {
                let key: Vec<usize> = facets.iter().map(|&f| surfaces[f]).collect();
                let cap = Capture {
                    distance: miss,
                    ray,
                    launch,
                    facets: facets.clone(),
                    points: points.clone(),
                    normals: normals.clone(),
                };
                match best.get(&key) {
                    Some(existing) if !cap.beats(existing) => {}
                    _ => {
                        best.insert(key, cap);
                    }
                }
            }
        }

        let Some(hit) = hit else { break };
        if bounce == config.sbr_max_bounces {
            break;
        }
        // One-sided reflectors: a ray arriving from behind is absorbed.
        let cos = dir.dot(&hit.normal);
        if cos >= 0.0 {
            break;
        }
        dir = (dir - hit.normal * (2.0 * cos)).normalize();
        origin = hit.point;
        travelled += hit.distance;
        facets.push(hit.facet_id);
        points.push(hit.point);
        normals.push(hit.normal);
    }
}

/// Outcome of matching exact paths against the ray-launching result.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleAgreement {
    pub exact_count: usize,
    pub sbr_count: usize,
    /// Surface sequences found by both engines.
    pub matched: usize,
    /// Exact paths without an SBR counterpart (surface sequences).
    pub missing_in_sbr: Vec<Vec<usize>>,
    /// SBR paths without an exact counterpart (surface sequences).
    pub extra_in_sbr: Vec<Vec<usize>>,
    /// Matched pairs whose facet sequences also agree exactly.
    pub identical_facet_sequences: usize,
    /// Worst departure-direction error over matched pairs, degrees.
    pub max_departure_error_deg: f64,
    pub max_arrival_error_deg: f64,
}

impl OracleAgreement {
    pub fn agrees(&self, max_angle_deg: f64) -> bool {
        self.missing_in_sbr.is_empty()
            && self.extra_in_sbr.is_empty()
            && self.exact_count == self.sbr_count
            && self.max_departure_error_deg <= max_angle_deg
            && self.max_arrival_error_deg <= max_angle_deg
    }
}

/// Matches exact and SBR paths by surface sequence, restricted to order <= `max_order`.
pub fn compare_with_sbr(index: &SpatialIndex, exact: &[PathRecord], sbr: &[PathRecord], max_order: usize) -> OracleAgreement {
    let surfaces = surface_ids(index);
    let key = |p: &PathRecord| -> Vec<usize> { p.facet_sequence().iter().map(|&f| surfaces[f]).collect() };
    let exact: BTreeMap<Vec<usize>, &PathRecord> = exact
        .iter()
        .filter(|p| p.order() <= max_order)
        .map(|p| (key(p), p))
        .collect();
    let sbr: BTreeMap<Vec<usize>, &PathRecord> = sbr
        .iter()
        .filter(|p| p.order() <= max_order)
        .map(|p| (key(p), p))
        .collect();
    let mut out = OracleAgreement {
        exact_count: exact.len(),
        sbr_count: sbr.len(),
        ..Default::default()
    };
    for (k, e) in &exact {
        match sbr.get(k) {
            Some(s) => {
                out.matched += 1;
                if e.facet_sequence() == s.facet_sequence() {
                    out.identical_facet_sequences += 1;
                }
                out.max_departure_error_deg =
                    out.max_departure_error_deg.max(angle_deg(&e.departure_direction(), &s.departure_direction()));
                out.max_arrival_error_deg =
                    out.max_arrival_error_deg.max(angle_deg(&e.arrival_direction(), &s.arrival_direction()));
            }
            None => out.missing_in_sbr.push(k.clone()),
        }
    }
    out.extra_in_sbr = sbr.keys().filter(|k| !exact.contains_key(*k)).cloned().collect();
    out
}

fn angle_deg(a: &Vector, b: &Vector) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fibonacci_directions_are_unit_and_deterministic() {
        let a: Vec<Vector> = fibonacci_directions(1000).collect();
        let b: Vec<Vector> = fibonacci_directions(1000).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|d| (d.norm() - 1.0).abs() < 1e-12));
        let mean: Vector = a.iter().sum::<Vector>() / 1000.0;
        assert!(mean.norm() < 1e-2);
    }

    #[test]
    fn zero_rays_gives_no_paths() {
        let scene = Scene::empty("e");
        let idx = scene.build_index();
        let cfg = TraceConfig {
            sbr_ray_count: 0,
            ..TraceConfig::default()
        };
        let out = sbr_trace(&scene, &idx, &Point::origin(), &Point::new(1.0, 0.0, 0.0), &cfg).unwrap();
        assert!(out.is_empty());
    }
}
