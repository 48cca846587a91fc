//! Lifting 2D segments into 3D polylines.

use serde::{Deserialize, Serialize};

use super::{point_segment_distance, simplify_polyline, Polyline, ReconstructConfig, Segment2D};
use crate::error::{Error, Result};
use crate::geometry::{Point, Vector};
use crate::views::{PathView, ViewConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BindFlag {
    /// One 2D segment supports more than one bound 3D segment.
    CollinearOverlap { view: PathView, segment: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BindResult {
    pub polylines: Vec<Polyline>,
    /// Clear segments that no bound 3D segment uses.
    pub residual_2d: Vec<Segment2D>,
    pub flags: Vec<BindFlag>,
}

/// A view's segments in world units on the view's (column, row) axes.
struct WorldView<'a> {
    view: PathView,
    segs: &'a [Segment2D],
    world: Vec<[[f64; 2]; 2]>,
}

impl<'a> WorldView<'a> {
    fn new(view: PathView, segs: &'a [Segment2D], config: &ViewConfig) -> Result<Self> {
        if let Some(i) = segs.iter().position(|s| s.view != view) {
            return Err(Error::contract(format!(
                "segment {i} belongs to view {} but was passed as {}",
                segs[i].view.tag(),
                view.tag()
            )));
        }
        let world = segs
            .iter()
            .map(|s| s.endpoints.map(|p| config.from_pixel(view.axes(), p)))
            .collect();
        Ok(WorldView { view, segs, world })
    }

    /// Component of local coordinate `k` that is world axis `axis`.
    fn slot(&self, axis: usize) -> Option<usize> {
        let (u, v) = self.view.plane();
        [u, v].iter().position(|&a| a == axis)
    }
}

struct Candidate {
    ends: [Point; 2],
    sources: [(usize, usize); 2],
    /// Third-view segment nearest the midpoint, if checked.
    verifier: Option<(usize, usize)>,
    blurred: usize,
    ill_conditioned: bool,
    disagreement: f64,
    length: f64,
}

/// Binds segments from the three path views into 3D polylines.
///
/// Every pair of views shares one world axis. Two segments whose ranges on
/// that axis overlap define a 3D segment, which is kept only if its
/// projection into the remaining view lies on one extracted stroke there.
/// `terminals` are known path ends (Tx, Rx); polylines never pass through
/// them. Pass an empty slice when they are unknown.
pub fn bind_views(
    xy: &[Segment2D],
    xz: &[Segment2D],
    yz: &[Segment2D],
    view_config: &ViewConfig,
    config: &ReconstructConfig,
    terminals: &[Point],
) -> Result<BindResult> {
    view_config.validate()?;
    let anchored = [
        anchor_terminals(xy, PathView::Xy, view_config, config, terminals),
        anchor_terminals(xz, PathView::Xz, view_config, config, terminals),
        anchor_terminals(yz, PathView::Yz, view_config, config, terminals),
    ];
    let (xy, xz, yz) = (&anchored[0][..], &anchored[1][..], &anchored[2][..]);
    let views = [
        WorldView::new(PathView::Xy, xy, view_config)?,
        WorldView::new(PathView::Xz, xz, view_config)?,
        WorldView::new(PathView::Yz, yz, view_config)?,
    ];
    let mpp = view_config.meters_per_pixel;
    let cap = config.disagreement_cap_px * mpp;

    let mut candidates = Vec::new();
    for (i, j, k) in [(0usize, 1usize, 2usize), (0, 2, 1), (1, 2, 0)] {
        let (va, vb, vc) = (&views[i], &views[j], &views[k]);
        let shared = shared_axis(va.view, vb.view);
        for (ia, a) in va.world.iter().enumerate() {
            for (ib, b) in vb.world.iter().enumerate() {
                if let Some(c) = pair(va, ia, a, vb, ib, b, vc, shared, mpp, cap, terminals)
                    .filter(|c| c.ends.iter().all(|e| endpoint_support(&views, e, cap) >= 2))
                {
                    candidates.push(Candidate {
                        sources: [(i, ia), (j, ib)],
                        verifier: c.verifier.map(|(_, s)| (k, s)),
                        ..c
                    });
                }
            }
        }
    }
    candidates.sort_by(|x, y| {
        (x.blurred, x.ill_conditioned)
            .cmp(&(y.blurred, y.ill_conditioned))
            .then(x.disagreement.total_cmp(&y.disagreement))
            .then(y.length.total_cmp(&x.length))
    });

    let mut selected: Vec<Candidate> = Vec::new();
    for c in candidates {
        let covered = (0..5)
            .map(|s| lerp3(&c.ends[0], &c.ends[1], s as f64 / 4.0))
            .filter(|p| selected.iter().any(|o| point_segment_distance3(p, &o.ends[0], &o.ends[1]) <= cap))
            .count();
        if covered < 3 {
            selected.push(c);
        }
    }

    let mut uses = [vec![0usize; xy.len()], vec![0usize; xz.len()], vec![0usize; yz.len()]];
    let mut verified = [vec![false; xy.len()], vec![false; xz.len()], vec![false; yz.len()]];
    for c in &selected {
        for &(v, s) in &c.sources {
            uses[v][s] += 1;
        }
        if let Some((v, s)) = c.verifier {
            verified[v][s] = true;
        }
    }
    let mut residual_2d = Vec::new();
    let mut flags = Vec::new();
    for (v, counts) in uses.iter().enumerate() {
        for (s, &n) in counts.iter().enumerate() {
            let seg = &views[v].segs[s];
            if n == 0 && !verified[v][s] && seg.is_clear() {
                residual_2d.push(seg.clone());
            }
            if n > 1 {
                flags.push(BindFlag::CollinearOverlap {
                    view: views[v].view,
                    segment: s,
                });
            }
        }
    }

    let segments: Vec<[Point; 2]> = selected.iter().map(|c| c.ends).collect();
    let polylines = chain(&segments, config.chain_tolerance_px * mpp, terminals)
        .into_iter()
        .map(|p| simplify_polyline(&p, 2.0))
        .collect();
    Ok(BindResult {
        polylines,
        residual_2d,
        flags,
    })
}

/// Endpoints this close to a terminal, on a line through it, snap to it, px.
const TERMINAL_SNAP_PX: f64 = 40.0;

/// A terminal in the middle of a straight stroke leaves no junction in the
/// skeleton, so the stroke is split at the terminal's projection and nearby
/// endpoints on lines through it are moved onto it.
fn anchor_terminals(
    segs: &[Segment2D],
    view: PathView,
    view_config: &ViewConfig,
    config: &ReconstructConfig,
    terminals: &[Point],
) -> Vec<Segment2D> {
    let cap = config.disagreement_cap_px;
    let mut out = segs.to_vec();
    if segs.iter().any(|s| s.view != view) {
        return out;
    }
    for t in terminals {
        let t = view_config.to_pixel(view.axes(), t);
        let mut next = Vec::with_capacity(out.len() + 1);
        for s in out {
            let [a, b] = s.endpoints;
            let through = point_segment_distance(t, a, b) <= cap;
            let near_end = super::dist2(a, t).min(super::dist2(b, t)) <= TERMINAL_SNAP_PX;
            if through && !near_end {
                next.push(Segment2D { endpoints: [a, t], ..s.clone() });
                next.push(Segment2D { endpoints: [t, b], ..s });
                continue;
            }
            let mut e = s.endpoints;
            if line_distance(t, a, b) <= cap {
                let k = usize::from(super::dist2(b, t) < super::dist2(a, t));
                if super::dist2(e[k], t) <= TERMINAL_SNAP_PX {
                    e[k] = t;
                }
            }
            if super::dist2(e[0], e[1]) >= config.min_segment_px {
                next.push(Segment2D { endpoints: e, ..s });
            }
        }
        out = next;
    }
    out
}

/// Distance from `p` to the infinite line through `a` and `b`.
fn line_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    if len < 1e-12 {
        return super::dist2(p, a);
    }
    ((p[0] - a[0]) * d[1] - (p[1] - a[1]) * d[0]).abs() / len
}

/// Number of views with a segment endpoint within `cap` of `p`'s projection.
/// A reflection off an axis-aligned surface is a bend in at least two views.
fn endpoint_support(views: &[WorldView; 3], p: &Point, cap: f64) -> usize {
    views
        .iter()
        .filter(|v| {
            let (u, w) = v.view.plane();
            let q = [p[u], p[w]];
            v.world.iter().flatten().any(|e| super::dist2(*e, q) <= cap)
        })
        .count()
}

/// Endpoints within this many chain tolerances of a terminal attach to it.
const TERMINAL_RADIUS_FACTOR: f64 = 3.0;

fn shared_axis(a: PathView, b: PathView) -> usize {
    let (a0, a1) = a.plane();
    let (b0, b1) = b.plane();
    if a0 == b0 || a0 == b1 {
        a0
    } else {
        debug_assert!(a1 == b0 || a1 == b1);
        a1
    }
}

#[allow(clippy::too_many_arguments)]
fn pair(
    va: &WorldView,
    ia: usize,
    a: &[[f64; 2]; 2],
    vb: &WorldView,
    ib: usize,
    b: &[[f64; 2]; 2],
    vc: &WorldView,
    shared: usize,
    mpp: f64,
    cap: f64,
    terminals: &[Point],
) -> Option<Candidate> {
    let (sa, sb) = (va.slot(shared)?, vb.slot(shared)?);
    let (oa, ob) = (1 - sa, 1 - sb);
    let range = |s: &[[f64; 2]; 2], k: usize| (s[0][k].min(s[1][k]), s[0][k].max(s[1][k]));
    let (a_lo, a_hi) = range(a, sa);
    let (b_lo, b_hi) = range(b, sb);
    let (lo, hi) = (a_lo.max(b_lo), a_hi.min(b_hi));
    if hi - lo < 3.0 * mpp {
        return None;
    }
    // The shorter projection must lie wholly inside the longer one.
    let spill = |r_lo: f64, r_hi: f64| (r_lo - lo).abs().max((r_hi - hi).abs());
    let mismatch = spill(a_lo, a_hi).min(spill(b_lo, b_hi));
    if mismatch > cap {
        return None;
    }
    let interp = |s: &[[f64; 2]; 2], ks: usize, ko: usize, at: f64| {
        let t = (at - s[0][ks]) / (s[1][ks] - s[0][ks]);
        s[0][ko] + t * (s[1][ko] - s[0][ko])
    };
    let other_a = va.view.plane();
    let other_a = if sa == 0 { other_a.1 } else { other_a.0 };
    let other_b = vb.view.plane();
    let other_b = if sb == 0 { other_b.1 } else { other_b.0 };
    let make = |at: f64| {
        let mut p = Point::origin();
        p[shared] = at;
        p[other_a] = interp(a, sa, oa, at);
        p[other_b] = interp(b, sb, ob, at);
        p
    };
    let ends = [make(lo), make(hi)];

    // Third-view check at five samples.
    let (cu, cv) = vc.view.plane();
    let project = |p: &Point| [p[cu], p[cv]];
    let projected_len = {
        let (p, q) = (project(&ends[0]), project(&ends[1]));
        super::dist2(p, q)
    };
    let mut worst: f64 = 0.0;
    let mut verifier = None;
    if projected_len >= 3.0 * mpp {
        let samples: Vec<[f64; 2]> = (0..5).map(|s| project(&lerp3(&ends[0], &ends[1], s as f64 / 4.0))).collect();
        let best = vc
            .world
            .iter()
            .enumerate()
            .map(|(n, w)| {
                let d = samples.iter().map(|p| point_segment_distance(*p, w[0], w[1])).fold(0.0, f64::max);
                (d, n)
            })
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .unwrap_or((f64::INFINITY, 0));
        // The line of sight is known a priori, so a third view that lost it
        // next to the terminals does not veto it.
        let line_of_sight = terminals.len() == 2
            && [(0, 1), (1, 0)].iter().any(|&(m, n)| {
                (ends[0] - terminals[m]).norm() <= cap && (ends[1] - terminals[n]).norm() <= cap
            });
        if best.0 <= cap {
            worst = best.0;
            verifier = Some((0, best.1));
        } else if !line_of_sight {
            return None;
        }
    }

    // All three views clear: average each coordinate over the views showing it.
    let mut ends = ends;
    let all_clear = va.segs[ia].is_clear() && vb.segs[ib].is_clear();
    if let (true, Some((_, n))) = (all_clear, verifier) {
        if vc.segs[n].is_clear() {
            let w = vc.world[n];
            for e in ends.iter_mut() {
                let q = closest_on_segment(project(e), w[0], w[1]);
                e[cu] = 0.5 * (e[cu] + q[0]);
                e[cv] = 0.5 * (e[cv] + q[1]);
            }
        }
    }

    let len2d = |s: &[[f64; 2]; 2]| super::dist2(s[0], s[1]);
    let conditioning = ((hi - lo) / len2d(a).max(1e-12)).min((hi - lo) / len2d(b).max(1e-12));
    Some(Candidate {
        ends,
        sources: [(0, ia), (0, ib)],
        verifier,
        blurred: usize::from(!va.segs[ia].is_clear()) + usize::from(!vb.segs[ib].is_clear()),
        ill_conditioned: conditioning < 0.7,
        disagreement: (worst + 0.5 * mismatch) / mpp,
        length: (ends[1] - ends[0]).norm(),
    })
}

fn closest_on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    super::lerp2(a, b, t)
}

fn lerp3(a: &Point, b: &Point, t: f64) -> Point {
    a + (b - a) * t
}

fn point_segment_distance3(p: &Point, a: &Point, b: &Point) -> f64 {
    let d: Vector = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + d * t)).norm()
}

/// Joins 3D segments sharing endpoints (within `tol`) into polylines that
/// run between terminals or vertices of degree other than two.
pub(crate) fn chain(segments: &[[Point; 2]], tol: f64, terminals: &[Point]) -> Vec<Polyline> {
    // Cluster endpoints; everything near a terminal joins it.
    let ends: Vec<Point> = segments.iter().flat_map(|s| s.iter().copied()).collect();
    let near_terminal: Vec<Option<usize>> = ends
        .iter()
        .map(|e| {
            terminals
                .iter()
                .enumerate()
                .map(|(k, t)| ((e - t).norm(), k))
                .filter(|(d, _)| *d <= TERMINAL_RADIUS_FACTOR * tol)
                .min_by(|x, y| x.0.total_cmp(&y.0))
                .map(|(_, k)| k)
        })
        .collect();
    let mut parent: Vec<usize> = (0..ends.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..ends.len() {
        for j in i + 1..ends.len() {
            let same_terminal = near_terminal[i].is_some() && near_terminal[i] == near_terminal[j];
            let other_terminal = near_terminal[i].is_some() && near_terminal[j].is_some() && !same_terminal;
            if same_terminal || (!other_terminal && (ends[i] - ends[j]).norm() <= tol) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut node_of = vec![usize::MAX; ends.len()];
    let mut nodes: Vec<(Vector, usize)> = Vec::new();
    let mut root_node = std::collections::BTreeMap::new();
    for i in 0..ends.len() {
        let r = find(&mut parent, i);
        let n = *root_node.entry(r).or_insert_with(|| {
            nodes.push((Vector::zeros(), 0));
            nodes.len() - 1
        });
        nodes[n].0 += ends[i].coords;
        nodes[n].1 += 1;
        node_of[i] = n;
    }
    let nodes: Vec<Point> = nodes.iter().map(|(s, c)| Point::from(s / *c as f64)).collect();
    let mut is_terminal = vec![false; nodes.len()];
    for (i, t) in near_terminal.iter().enumerate() {
        if t.is_some() {
            is_terminal[node_of[i]] = true;
        }
    }

    // Edges, split where another node sits on a segment's interior.
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (k, _) in segments.iter().enumerate() {
        let (a, b) = (node_of[2 * k], node_of[2 * k + 1]);
        if a == b {
            continue;
        }
        let (pa, pb) = (nodes[a], nodes[b]);
        let dir = pb - pa;
        let mut inner: Vec<(f64, usize)> = nodes
            .iter()
            .enumerate()
            .filter(|&(n, _)| n != a && n != b)
            .filter_map(|(n, p)| {
                let t = (p - pa).dot(&dir) / dir.norm_squared();
                (t > 0.0 && t < 1.0 && point_segment_distance3(p, &pa, &pb) <= tol).then_some((t, n))
            })
            .collect();
        inner.sort_by(|x, y| x.0.total_cmp(&y.0));
        let seq: Vec<usize> = std::iter::once(a).chain(inner.into_iter().map(|(_, n)| n)).chain(std::iter::once(b)).collect();
        for w in seq.windows(2) {
            let e = (w[0].min(w[1]), w[0].max(w[1]));
            if !edges.contains(&e) {
                edges.push(e);
            }
        }
    }

    let mut adjacency = vec![Vec::new(); nodes.len()];
    for (e, &(a, b)) in edges.iter().enumerate() {
        adjacency[a].push(e);
        adjacency[b].push(e);
    }
    let mut used = vec![false; edges.len()];
    let mut out = Vec::new();
    let walk = |start: usize, first: usize, used: &mut Vec<bool>| {
        let mut poly = vec![nodes[start]];
        let (mut node, mut edge) = (start, first);
        loop {
            used[edge] = true;
            let (a, b) = edges[edge];
            node = if a == node { b } else { a };
            poly.push(nodes[node]);
            if adjacency[node].len() != 2 || is_terminal[node] {
                break;
            }
            match adjacency[node].iter().find(|&&e| !used[e]) {
                Some(&e) => edge = e,
                None => break,
            }
        }
        poly
    };
    for n in 0..nodes.len() {
        if adjacency[n].len() != 2 || is_terminal[n] {
            for &e in &adjacency[n] {
                if !used[e] {
                    out.push(walk(n, e, &mut used));
                }
            }
        }
    }
    for e in 0..edges.len() {
        if !used[e] {
            out.push(walk(edges[e].0, e, &mut used));
        }
    }
    out
}
