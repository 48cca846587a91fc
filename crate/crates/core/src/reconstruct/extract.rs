//! Raster strokes to straight 2D segments.

use image::GrayImage;

use super::{dist2, Clarity, ReconstructConfig, Segment2D};
use crate::views::PathView;

/// Free-ended strokes this short hanging off a junction are dropped.
const SPUR_PX: usize = 8;

/// Strokes this short between two junctions are folded into one junction.
const BRIDGE_PX: usize = 10;

// Neighbour offsets in the P2..P9 order (N, NE, E, SE, S, SW, W, NW).
const RING: [(i64, i64); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

/// Zhang-Suen thinning of a row-major mask, in place, with the Lü-Wang
/// neighbour-count bound (3..=6) that keeps 2-px diagonal strokes.
pub fn zhang_suen_thin(mask: &mut [bool], width: usize, height: usize) {
    let mut live: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    loop {
        let mut changed = false;
        for step in 0..2 {
            let doomed: Vec<usize> = live
                .iter()
                .copied()
                .filter(|&i| {
                    let n = ring(mask, width, height, i);
                    let count = n.iter().filter(|&&b| b).count();
                    if !(3..=6).contains(&count) || transitions(&n) != 1 {
                        return false;
                    }
                    if step == 0 {
                        !(n[0] && n[2] && n[4]) && !(n[2] && n[4] && n[6])
                    } else {
                        !(n[0] && n[2] && n[6]) && !(n[0] && n[4] && n[6])
                    }
                })
                .collect();
            for &i in &doomed {
                mask[i] = false;
            }
            changed |= !doomed.is_empty();
            live.retain(|&i| mask[i]);
        }
        if !changed {
            break;
        }
    }
}

/// Removes staircase corners left by thinning so that line pixels have
/// exactly two 8-neighbours. Deletions are sequential and never split the
/// neighbourhood into more than one 8-connected piece.
pub fn prune_staircases(mask: &mut [bool], width: usize, height: usize) {
    loop {
        let mut changed = false;
        for i in 0..mask.len() {
            if !mask[i] {
                continue;
            }
            let n = ring(mask, width, height, i);
            let count = n.iter().filter(|&&b| b).count();
            let corner = (n[0] && n[2]) || (n[2] && n[4]) || (n[4] && n[6]) || (n[6] && n[0]);
            if count >= 2 && corner && ring_components(&n) == 1 {
                mask[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// 8-connected pieces among the set ring neighbours.
fn ring_components(n: &[bool; 8]) -> usize {
    let mut parent = [0usize, 1, 2, 3, 4, 5, 6, 7];
    fn find(p: &mut [usize; 8], mut i: usize) -> usize {
        while p[i] != i {
            i = p[i];
        }
        i
    }
    let mut join = |a: usize, b: usize| {
        if n[a] && n[b] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
    };
    for k in 0..8 {
        join(k, (k + 1) % 8);
    }
    for k in [0, 2, 4, 6] {
        join(k, (k + 2) % 8);
    }
    (0..8).filter(|&k| n[k] && find(&mut parent, k) == k).count()
}

fn ring(mask: &[bool], width: usize, height: usize, i: usize) -> [bool; 8] {
    let (x, y) = ((i % width) as i64, (i / width) as i64);
    RING.map(|(dx, dy)| {
        let (nx, ny) = (x + dx, y + dy);
        nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height && mask[ny as usize * width + nx as usize]
    })
}

/// Number of 0→1 transitions around the ring (crossing number).
fn transitions(n: &[bool; 8]) -> usize {
    (0..8).filter(|&k| !n[k] && n[(k + 1) % 8]).count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum End {
    Free,
    Junction(usize),
}

struct Stroke {
    pixels: Vec<usize>,
    ends: [End; 2],
    /// A cycle with no junction; its first and last pixels touch.
    closed: bool,
}

struct Skeleton<'a> {
    mask: Vec<bool>,
    width: usize,
    height: usize,
    /// Junction cluster per pixel, if any.
    cluster: Vec<Option<usize>>,
    image: &'a GrayImage,
}

impl Skeleton<'_> {
    fn neighbours(&self, i: usize) -> impl Iterator<Item = (usize, bool)> + '_ {
        let (x, y) = ((i % self.width) as i64, (i / self.width) as i64);
        RING.iter().filter_map(move |&(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx as usize >= self.width || ny as usize >= self.height {
                return None;
            }
            let j = ny as usize * self.width + nx as usize;
            self.mask[j].then_some((j, dx == 0 || dy == 0))
        })
    }

    fn center(&self, i: usize) -> [f64; 2] {
        [(i % self.width) as f64 + 0.5, (i / self.width) as f64 + 0.5]
    }

    /// Peak intensity in the 3×3 neighbourhood, in [0, 1].
    fn peak(&self, i: usize) -> f64 {
        let (x, y) = (i % self.width, i / self.width);
        let mut best = 0u8;
        for yy in y.saturating_sub(1)..=(y + 1).min(self.height - 1) {
            for xx in x.saturating_sub(1)..=(x + 1).min(self.width - 1) {
                best = best.max(self.image.get_pixel(xx as u32, yy as u32).0[0]);
            }
        }
        best as f64 / 255.0
    }

    fn walk(&self, start: usize, from: End, visited: &mut [bool]) -> Stroke {
        let mut pixels = vec![start];
        visited[start] = true;
        let mut cur = start;
        loop {
            let stop = self.neighbours(cur).find_map(|(j, _)| {
                self.cluster[j].filter(|&c| End::Junction(c) != from || pixels.len() > 3)
            });
            if let Some(c) = stop {
                return Stroke {
                    pixels,
                    ends: [from, End::Junction(c)],
                    closed: false,
                };
            }
            let next = self
                .neighbours(cur)
                .filter(|&(j, _)| !visited[j] && self.cluster[j].is_none())
                .max_by_key(|&(j, straight)| (straight, std::cmp::Reverse(j)));
            match next {
                Some((j, _)) => {
                    visited[j] = true;
                    pixels.push(j);
                    cur = j;
                }
                None => {
                    return Stroke {
                        pixels,
                        ends: [from, End::Free],
                        closed: false,
                    }
                }
            }
        }
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Straight line through a point set (centroid and unit direction).
#[derive(Debug, Clone, Copy)]
struct Line {
    origin: [f64; 2],
    dir: [f64; 2],
}

impl Line {
    fn fit(points: &[[f64; 2]]) -> Line {
        let n = points.len() as f64;
        let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for p in points {
            let (dx, dy) = (p[0] - cx, p[1] - cy);
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        let mut dir = [theta.cos(), theta.sin()];
        if points.len() >= 2 {
            let span = [points[points.len() - 1][0] - points[0][0], points[points.len() - 1][1] - points[0][1]];
            if span[0] * dir[0] + span[1] * dir[1] < 0.0 {
                dir = [-dir[0], -dir[1]];
            }
        }
        Line { origin: [cx, cy], dir }
    }

    fn project(&self, p: [f64; 2]) -> [f64; 2] {
        let t = (p[0] - self.origin[0]) * self.dir[0] + (p[1] - self.origin[1]) * self.dir[1];
        [self.origin[0] + self.dir[0] * t, self.origin[1] + self.dir[1] * t]
    }

    fn intersect(&self, other: &Line) -> Option<[f64; 2]> {
        let det = self.dir[0] * other.dir[1] - self.dir[1] * other.dir[0];
        if det.abs() < (2f64).to_radians().sin() {
            return None;
        }
        let d = [other.origin[0] - self.origin[0], other.origin[1] - self.origin[1]];
        let t = (d[0] * other.dir[1] - d[1] * other.dir[0]) / det;
        Some([self.origin[0] + self.dir[0] * t, self.origin[1] + self.dir[1] * t])
    }
}

/// Index ranges of a Douglas-Peucker split of `pts`.
fn douglas_peucker(pts: &[[f64; 2]], tolerance: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut stack = vec![(0, pts.len() - 1)];
    while let Some((a, b)) = stack.pop() {
        let mut worst = (0.0, a);
        for k in a + 1..b {
            let d = super::point_segment_distance(pts[k], pts[a], pts[b]);
            if d > worst.0 {
                worst = (d, k);
            }
        }
        if worst.0 > tolerance {
            stack.push((worst.1, b));
            stack.push((a, worst.1));
        } else {
            out.push((a, b));
        }
    }
    out
}

struct Piece {
    /// Skeleton points at the piece's ends.
    span: [[f64; 2]; 2],
    intensity: f64,
    /// Skeleton pixel count, weights intensity when pieces merge.
    weight: f64,
    moments: Moments,
    line: Line,
    ends: [[f64; 2]; 2],
    /// Junction at each end, if any.
    junction: [Option<usize>; 2],
}

impl Piece {
    fn absorb(&mut self, next: Piece) {
        self.intensity = (self.intensity * self.weight + next.intensity * next.weight) / (self.weight + next.weight);
        self.weight += next.weight;
        self.moments.merge(&next.moments);
        self.line = self.moments.line(self.line.dir).unwrap_or(self.line);
        self.span[1] = next.span[1];
        self.ends = self.span.map(|p| self.line.project(p));
        self.junction[1] = next.junction[1];
    }
}

/// Whether two neighbouring pieces are one straight stroke: nearly
/// parallel, and their joint fit passes within the split tolerance of both
/// raster centroids and the skeleton split point. Outer skeleton ends are
/// left out since thinning drags them at corners.
fn continues(a: &Piece, b: &Piece, tolerance: f64) -> bool {
    let cross = (a.line.dir[0] * b.line.dir[1] - a.line.dir[1] * b.line.dir[0]).abs();
    if cross >= MERGE_MAX_ANGLE_DEG.to_radians().sin() {
        return false;
    }
    let mut m = a.moments;
    m.merge(&b.moments);
    let Some(line) = m.line(a.line.dir) else {
        return false;
    };
    [a.line.origin, b.line.origin, a.span[1], b.span[0]]
        .iter()
        .all(|p| dist2(line.project(*p), *p) <= tolerance)
}

fn merge_agreeing(pieces: Vec<Piece>, tolerance: f64) -> Vec<Piece> {
    let mut merged: Vec<Piece> = Vec::new();
    for piece in pieces {
        if let Some(last) = merged.last_mut() {
            if continues(last, &piece, tolerance) {
                last.absorb(piece);
                continue;
            }
        }
        merged.push(piece);
    }
    merged
}

/// A short piece at a stroke end, or between neighbours whose lines meet
/// close to it.
fn is_debris(pieces: &[Piece], i: usize) -> bool {
    let len = dist2(pieces[i].span[0], pieces[i].span[1]);
    if len >= DEBRIS_PX {
        return false;
    }
    if i == 0 || i + 1 == pieces.len() {
        return true;
    }
    let mid = super::lerp2(pieces[i].span[0], pieces[i].span[1], 0.5);
    pieces[i - 1]
        .line
        .intersect(&pieces[i + 1].line)
        .is_some_and(|q| dist2(q, mid) <= len + 3.0)
}

/// Index of the neighbour whose line a short piece `i` follows. The far tip
/// may stray further, since thinning pulls it toward converging strokes.
fn tail_of(pieces: &[Piece], i: usize) -> Option<usize> {
    let p = &pieces[i];
    if dist2(p.span[0], p.span[1]) >= TAIL_PX {
        return None;
    }
    let mid = super::lerp2(p.span[0], p.span[1], 0.5);
    let off = |j: usize, q: [f64; 2]| dist2(pieces[j].line.project(q), q);
    let before = i.checked_sub(1).filter(|&j| off(j, p.span[0]) <= 2.0 && off(j, mid) <= 2.0 && off(j, p.span[1]) <= TAIL_TIP_PX);
    let after = (i + 1 < pieces.len())
        .then_some(i + 1)
        .filter(|&j| off(j, p.span[1]) <= 2.0 && off(j, mid) <= 2.0 && off(j, p.span[0]) <= TAIL_TIP_PX);
    before.or(after)
}

/// Neighbouring pieces further apart than this never merge, degrees.
const MERGE_MAX_ANGLE_DEG: f64 = 3.0;
/// Pieces shorter than this may be bent tails of a neighbour, px.
const TAIL_PX: f64 = 25.0;
/// Largest offset of a tail's far tip from the neighbour's line, px.
const TAIL_TIP_PX: f64 = 3.0;
/// Stroke pieces shorter than this may be corner debris, px.
const DEBRIS_PX: f64 = 10.0;
/// Half-width of the raster band a line is refit against, px.
const BAND_PX: f64 = 2.0;
/// Raster excluded next to a junction when refitting, px.
const JUNCTION_MARGIN_PX: f64 = 6.0;
/// Douglas-Peucker pieces shorter than this are thinning debris, px.
const MIN_PIECE_PX: f64 = 5.0;
/// Farthest a bend may move from the skeleton split point, px.
const MAX_CORNER_SHIFT_PX: f64 = 15.0;

/// Intensity-weighted second moments of raster samples.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    w: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
    syy: f64,
}

impl Moments {
    fn add(&mut self, p: [f64; 2], w: f64) {
        self.w += w;
        self.sx += w * p[0];
        self.sy += w * p[1];
        self.sxx += w * p[0] * p[0];
        self.sxy += w * p[0] * p[1];
        self.syy += w * p[1] * p[1];
    }

    fn merge(&mut self, o: &Moments) {
        self.w += o.w;
        self.sx += o.sx;
        self.sy += o.sy;
        self.sxx += o.sxx;
        self.sxy += o.sxy;
        self.syy += o.syy;
    }

    /// Principal line, oriented along `along`.
    fn line(&self, along: [f64; 2]) -> Option<Line> {
        if self.w <= 0.0 {
            return None;
        }
        let (cx, cy) = (self.sx / self.w, self.sy / self.w);
        let sxx = self.sxx / self.w - cx * cx;
        let syy = self.syy / self.w - cy * cy;
        let sxy = self.sxy / self.w - cx * cy;
        let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        let mut dir = [theta.cos(), theta.sin()];
        if dir[0] * along[0] + dir[1] * along[1] < 0.0 {
            dir = [-dir[0], -dir[1]];
        }
        Some(Line { origin: [cx, cy], dir })
    }
}

/// Refits `line` to raster samples within [`BAND_PX`] of it, between the
/// projections of `span` shrunk by `margin` at each end.
fn refit(image: &GrayImage, line: Line, span: [[f64; 2]; 2], margin: [f64; 2]) -> (Line, Moments) {
    let mut line = line;
    let mut moments = Moments::default();
    for _ in 0..2 {
        let t = |p: [f64; 2]| (p[0] - line.origin[0]) * line.dir[0] + (p[1] - line.origin[1]) * line.dir[1];
        let (t0, t1) = (t(span[0]), t(span[1]));
        let len = t1 - t0;
        let (m0, m1) = (margin[0].min(len / 3.0), margin[1].min(len / 3.0));
        let (lo, hi) = (t0 + m0, t1 - m1);
        let mut m = Moments::default();
        let xs = [span[0][0], span[1][0]];
        let ys = [span[0][1], span[1][1]];
        let pad = BAND_PX + 1.0;
        let x0 = (xs[0].min(xs[1]) - pad).floor().max(0.0) as u32;
        let x1 = ((xs[0].max(xs[1]) + pad).ceil().max(0.0) as u32).min(image.width());
        let y0 = (ys[0].min(ys[1]) - pad).floor().max(0.0) as u32;
        let y1 = ((ys[0].max(ys[1]) + pad).ceil().max(0.0) as u32).min(image.height());
        for y in y0..y1 {
            for x in x0..x1 {
                let v = image.get_pixel(x, y).0[0];
                if v == 0 {
                    continue;
                }
                let c = [x as f64 + 0.5, y as f64 + 0.5];
                let tc = t(c);
                let q = [line.origin[0] + line.dir[0] * tc, line.origin[1] + line.dir[1] * tc];
                if tc >= lo && tc <= hi && dist2(c, q) <= BAND_PX {
                    m.add(c, v as f64);
                }
            }
        }
        match m.line(line.dir) {
            Some(l) if m.w > 0.0 => {
                line = l;
                moments = m;
            }
            _ => break,
        }
    }
    (line, moments)
}

/// Straight segments of one path view.
pub fn extract_segments(image: &GrayImage, view: PathView, config: &ReconstructConfig) -> Vec<Segment2D> {
    let (width, height) = (image.width() as usize, image.height() as usize);
    let level = config.threshold * 255.0;
    let mut mask: Vec<bool> = image.pixels().map(|p| p.0[0] > 0 && p.0[0] as f64 >= level).collect();
    zhang_suen_thin(&mut mask, width, height);
    prune_staircases(&mut mask, width, height);

    // Junction pixels (three or more neighbours) grouped 8-connectedly.
    let degree = |m: &[bool], i: usize| ring(m, width, height, i).iter().filter(|&&b| b).count();
    let junction_px: Vec<usize> = (0..mask.len()).filter(|&i| mask[i] && degree(&mask, i) >= 3).collect();
    let mut uf = UnionFind::new(mask.len());
    let is_junction = {
        let mut v = vec![false; mask.len()];
        for &i in &junction_px {
            v[i] = true;
        }
        v
    };
    let mut sk = Skeleton {
        mask,
        width,
        height,
        cluster: vec![None; width * height],
        image,
    };
    for &i in &junction_px {
        for (j, _) in sk.neighbours(i).collect::<Vec<_>>() {
            if is_junction[j] {
                uf.union(i, j);
            }
        }
    }
    for &i in &junction_px {
        sk.cluster[i] = Some(uf.find(i));
    }

    // Trace strokes from junction arms, then free ends, then loops.
    let mut visited = vec![false; width * height];
    let mut strokes = Vec::new();
    for &i in &junction_px {
        let c = sk.cluster[i].expect("junction pixel");
        let arms: Vec<usize> = sk
            .neighbours(i)
            .filter(|&(j, _)| sk.cluster[j].is_none())
            .map(|(j, _)| j)
            .collect();
        for j in arms {
            if !visited[j] {
                strokes.push(sk.walk(j, End::Junction(c), &mut visited));
            }
        }
    }
    let skeleton_px: Vec<usize> = (0..sk.mask.len()).filter(|&i| sk.mask[i] && sk.cluster[i].is_none()).collect();
    for &i in &skeleton_px {
        if !visited[i] && degree(&sk.mask, i) <= 1 {
            strokes.push(sk.walk(i, End::Free, &mut visited));
        }
    }
    for &i in &skeleton_px {
        if !visited[i] {
            let mut s = sk.walk(i, End::Free, &mut visited);
            s.closed = true;
            strokes.push(s);
        }
    }

    // Short free-ended strokes off a junction are thinning spurs.
    strokes.retain(|s| {
        let spur = matches!(s.ends, [End::Junction(_), End::Free] | [End::Free, End::Junction(_)]);
        !(spur && s.pixels.len() < SPUR_PX)
    });

    // Collapse short bridges between junctions into one cluster.
    let mut cluster_uf = UnionFind::new(width * height);
    let mut cluster_pixels: std::collections::BTreeMap<usize, Vec<[f64; 2]>> = Default::default();
    for &i in &junction_px {
        cluster_pixels.entry(sk.cluster[i].expect("junction")).or_default().push(sk.center(i));
    }
    let mut bridges = Vec::new();
    for (k, s) in strokes.iter().enumerate() {
        if let [End::Junction(a), End::Junction(b)] = s.ends {
            if s.pixels.len() <= BRIDGE_PX {
                cluster_uf.union(a, b);
                bridges.push(k);
            }
        }
    }
    for &k in &bridges {
        if let End::Junction(a) = strokes[k].ends[0] {
            let pts: Vec<[f64; 2]> = strokes[k].pixels.iter().map(|&i| sk.center(i)).collect();
            cluster_pixels.entry(a).or_default().extend(pts);
        }
    }
    let mut merged_pixels: std::collections::BTreeMap<usize, Vec<[f64; 2]>> = Default::default();
    for (c, pts) in cluster_pixels {
        merged_pixels.entry(cluster_uf.find(c)).or_default().extend(pts);
    }

    // Split strokes into straight pieces. The skeleton fixes topology and
    // the split points; each line is refit to the raster itself because
    // thinning bends strokes near corners and junctions.
    let mut pieces: Vec<Piece> = Vec::new();
    for (k, s) in strokes.iter().enumerate() {
        if bridges.contains(&k) {
            continue;
        }
        let ends = s.ends.map(|e| match e {
            End::Junction(c) => Some(cluster_uf.find(c)),
            End::Free => None,
        });
        if ends[0].is_some() && ends[0] == ends[1] && s.pixels.len() < 8 {
            continue;
        }
        let pts: Vec<[f64; 2]> = s.pixels.iter().map(|&i| sk.center(i)).collect();
        let peaks: Vec<f64> = s.pixels.iter().map(|&i| sk.peak(i)).collect();
        if pts.len() < 2 {
            continue;
        }
        let mut ranges = douglas_peucker(&pts, config.max_deviation_px);
        if ranges.len() > 1 {
            let longest = ranges
                .iter()
                .copied()
                .max_by(|x, y| dist2(pts[x.0], pts[x.1]).total_cmp(&dist2(pts[y.0], pts[y.1])))
                .expect("non-empty");
            ranges.retain(|&(a, b)| (a, b) == longest || dist2(pts[a], pts[b]) >= MIN_PIECE_PX);
        }
        let skeleton_lines: Vec<Line> = ranges.iter().map(|&(a, b)| Line::fit(&pts[a..=b])).collect();
        let corner_margin = |l: &Line, m: &Line| {
            let sin = (l.dir[0] * m.dir[1] - l.dir[1] * m.dir[0]).abs().max(0.1);
            (BAND_PX / sin + 1.0).max(3.0)
        };
        let mut stroke_pieces: Vec<Piece> = Vec::new();
        for (r, &(a, b)) in ranges.iter().enumerate() {
            let margin = [
                if r > 0 {
                    corner_margin(&skeleton_lines[r - 1], &skeleton_lines[r])
                } else if ends[0].is_some() {
                    JUNCTION_MARGIN_PX
                } else {
                    0.0
                },
                if r + 1 < ranges.len() {
                    corner_margin(&skeleton_lines[r], &skeleton_lines[r + 1])
                } else if ends[1].is_some() {
                    JUNCTION_MARGIN_PX
                } else {
                    0.0
                },
            ];
            let span = [pts[a], pts[b]];
            let (line, moments) = refit(image, skeleton_lines[r], span, margin);
            stroke_pieces.push(Piece {
                intensity: peaks[a..=b].iter().sum::<f64>() / (b - a + 1) as f64,
                ends: span.map(|p| line.project(p)),
                weight: (b - a + 1) as f64,
                span,
                moments,
                line,
                junction: [if r == 0 { ends[0] } else { None }, if r + 1 == ranges.len() { ends[1] } else { None }],
            });
        }
        // Neighbours whose refit lines agree were split by thinning noise.
        let mut merged = merge_agreeing(stroke_pieces, config.max_deviation_px);
        // Short pieces where two lines meet are corner debris.
        // A short piece lying along a neighbour's line is a bent tail of it.
        while let Some((i, j)) = (0..merged.len()).find_map(|i| tail_of(&merged, i).map(|j| (i, j))) {
            let gone = merged.remove(i);
            let j = if j > i { j - 1 } else { j };
            if j < i {
                merged[j].span[1] = gone.span[1];
                merged[j].junction[1] = gone.junction[1];
            } else {
                merged[j].span[0] = gone.span[0];
                merged[j].junction[0] = gone.junction[0];
            }
            let line = merged[j].line;
            merged[j].ends = merged[j].span.map(|p| line.project(p));
        }
        while let Some(i) = (0..merged.len()).find(|&i| merged.len() > 1 && is_debris(&merged, i)) {
            let gone = merged.remove(i);
            if i == 0 {
                merged[0].junction[0] = gone.junction[0];
            } else if i == merged.len() {
                merged[i - 1].junction[1] = gone.junction[1];
            }
            merged = merge_agreeing(merged, config.max_deviation_px);
        }
        // A cycle starts wherever the walk did, often mid-stroke.
        if s.closed && merged.len() > 2 && continues(&merged[merged.len() - 1], &merged[0], config.max_deviation_px) {
            let first = merged.remove(0);
            merged.last_mut().expect("non-empty").absorb(first);
        }
        // Bends sit at the intersection of neighbouring fits.
        let n = merged.len();
        let bends = if s.closed && n > 2 { n } else { n.saturating_sub(1) };
        for p in 0..bends {
            let q = (p + 1) % n;
            let corner = [
                (merged[p].span[1][0] + merged[q].span[0][0]) / 2.0,
                (merged[p].span[1][1] + merged[q].span[0][1]) / 2.0,
            ];
            let bend = merged[p]
                .line
                .intersect(&merged[q].line)
                .filter(|c| dist2(*c, corner) <= MAX_CORNER_SHIFT_PX)
                .unwrap_or(corner);
            merged[p].ends[1] = bend;
            merged[q].ends[0] = bend;
        }
        if s.closed && n > 2 {
            pieces.extend(merged);
            continue;
        }
        if let Some(first) = merged.first_mut() {
            if first.junction[0].is_none() {
                let d = first.line.dir;
                first.ends[0] = refine_free_end(image, first.line.project(first.span[0]), [-d[0], -d[1]]);
            }
        }
        if let Some(last) = merged.last_mut() {
            if last.junction[1].is_none() {
                last.ends[1] = refine_free_end(image, last.line.project(last.span[1]), last.line.dir);
            }
        }
        pieces.extend(merged);
    }

    // Junction points: least-squares intersection of the incident lines.
    let mut arms: std::collections::BTreeMap<usize, Vec<(usize, usize)>> = Default::default();
    for (p, piece) in pieces.iter().enumerate() {
        for e in 0..2 {
            if let Some(c) = piece.junction[e] {
                arms.entry(c).or_default().push((p, e));
            }
        }
    }
    let mut piece_uf = UnionFind::new(pieces.len());
    let mut consumed = vec![[false; 2]; pieces.len()];
    let cos_merge = config.merge_angle_deg.to_radians().cos();
    for (c, incident) in &arms {
        let centroid = {
            let pts = &merged_pixels[c];
            let n = pts.len() as f64;
            [pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n]
        };
        let j = least_squares_point(incident.iter().map(|&(p, _)| pieces[p].line))
            .filter(|q| dist2(*q, centroid) <= 20.0)
            .unwrap_or(centroid);
        for &(p, e) in incident {
            pieces[p].ends[e] = pieces[p].line.project(j);
        }
        // Pair arms that continue straight through the junction.
        let outward = |&(p, e): &(usize, usize)| {
            let d = pieces[p].line.dir;
            if e == 0 {
                d
            } else {
                [-d[0], -d[1]]
            }
        };
        let mut pairs = Vec::new();
        for a in 0..incident.len() {
            for b in a + 1..incident.len() {
                let (da, db) = (outward(&incident[a]), outward(&incident[b]));
                let cos = -(da[0] * db[0] + da[1] * db[1]);
                if cos >= cos_merge && incident[a].0 != incident[b].0 {
                    pairs.push((cos, a, b));
                }
            }
        }
        pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal).then((x.1, x.2).cmp(&(y.1, y.2))));
        // Only a crossing pairs off every arm; a path end meeting a
        // nearly antiparallel arm is not re-merged.
        let mut used = vec![false; incident.len()];
        let mut chosen = Vec::new();
        for (_, a, b) in pairs {
            if used[a] || used[b] || incident[a].0 == incident[b].0 {
                continue;
            }
            used[a] = true;
            used[b] = true;
            chosen.push((a, b));
        }
        if used.iter().all(|&u| u) {
            for (a, b) in chosen {
                let (pa, pb) = (incident[a].0, incident[b].0);
                if piece_uf.find(pa) == piece_uf.find(pb) {
                    continue;
                }
                piece_uf.union(pa, pb);
                consumed[pa][incident[a].1] = true;
                consumed[pb][incident[b].1] = true;
            }
        }
    }

    // One segment per merged group of pieces.
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for p in 0..pieces.len() {
        groups.entry(piece_uf.find(p)).or_default().push(p);
    }
    let mut out = Vec::new();
    for members in groups.values() {
        let consumed = &consumed;
        let free: Vec<[f64; 2]> = members
            .iter()
            .flat_map(|&p| (0..2).filter(move |&e| !consumed[p][e]).map(move |e| (p, e)))
            .map(|(p, e)| pieces[p].ends[e])
            .collect();
        if free.len() != 2 {
            continue;
        }
        let (a, b) = if members.len() == 1 {
            (free[0], free[1])
        } else {
            let mut m = Moments::default();
            for &p in members {
                m.merge(&pieces[p].moments);
            }
            match m.line([free[1][0] - free[0][0], free[1][1] - free[0][1]]) {
                Some(line) => (line.project(free[0]), line.project(free[1])),
                None => (free[0], free[1]),
            }
        };
        let count: f64 = members.iter().map(|&p| pieces[p].weight).sum();
        let intensity = members.iter().map(|&p| pieces[p].intensity * pieces[p].weight).sum::<f64>() / count;
        if dist2(a, b) < config.min_segment_px {
            continue;
        }
        out.push(Segment2D {
            view,
            endpoints: [a, b],
            mean_intensity: intensity,
            clarity: if intensity >= config.clarity_threshold {
                Clarity::Clear
            } else {
                Clarity::Blurred
            },
        });
    }
    out
}

/// Bilinear sample over pixel centres, zero outside the image.
fn sample(image: &GrayImage, p: [f64; 2]) -> f64 {
    let (x, y) = (p[0] - 0.5, p[1] - 0.5);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let at = |xx: f64, yy: f64| {
        if xx < 0.0 || yy < 0.0 || xx >= image.width() as f64 || yy >= image.height() as f64 {
            0.0
        } else {
            image.get_pixel(xx as u32, yy as u32).0[0] as f64
        }
    };
    at(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + at(x0 + 1.0, y0) * fx * (1.0 - fy)
        + at(x0, y0 + 1.0) * (1.0 - fx) * fy
        + at(x0 + 1.0, y0 + 1.0) * fx * fy
}

/// Thinning erodes stroke tips; move a free end to where the profile along
/// `outward` drops to half the stroke peak, less the half-pixel falloff.
fn refine_free_end(image: &GrayImage, end: [f64; 2], outward: [f64; 2]) -> [f64; 2] {
    let at = |t: f64| sample(image, [end[0] + outward[0] * t, end[1] + outward[1] * t]);
    let peak = (0..=30).map(|k| at(-3.0 + 0.1 * k as f64)).fold(0.0, f64::max);
    if peak <= 0.0 {
        return end;
    }
    let mut t = -2.0;
    while t < 15.0 && at(t) >= 0.5 * peak {
        t += 0.05;
    }
    let shift = t - 0.5;
    [end[0] + outward[0] * shift, end[1] + outward[1] * shift]
}

/// Point minimizing the summed squared distance to `lines`, if well posed.
fn least_squares_point(lines: impl Iterator<Item = Line>) -> Option<[f64; 2]> {
    let (mut a, mut b, mut c, mut rx, mut ry) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut n = 0;
    for l in lines {
        let (dx, dy) = (l.dir[0], l.dir[1]);
        let (m00, m01, m11) = (1.0 - dx * dx, -dx * dy, 1.0 - dy * dy);
        a += m00;
        b += m01;
        c += m11;
        rx += m00 * l.origin[0] + m01 * l.origin[1];
        ry += m01 * l.origin[0] + m11 * l.origin[1];
        n += 1;
    }
    let det = a * c - b * b;
    if n < 2 || det < 1e-3 * n as f64 {
        return None;
    }
    Some([(c * rx - b * ry) / det, (a * ry - b * rx) / det])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::views::draw_segment;

    fn segs(img: &GrayImage) -> Vec<Segment2D> {
        extract_segments(img, PathView::Xy, &ReconstructConfig::default())
    }

    fn close(p: [f64; 2], q: [f64; 2], tol: f64) -> bool {
        dist2(p, q) <= tol
    }

    fn has(s: &Segment2D, a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
        (close(s.endpoints[0], a, tol) && close(s.endpoints[1], b, tol)) || (close(s.endpoints[0], b, tol) && close(s.endpoints[1], a, tol))
    }

    #[test]
    fn black_image_has_no_segments() {
        assert!(segs(&GrayImage::new(64, 64)).is_empty());
    }

    #[test]
    fn single_segment_endpoints_within_one_pixel() {
        let mut img = GrayImage::new(512, 512);
        draw_segment(&mut img, [10.0, 10.0], [500.0, 300.0], 255);
        let s = segs(&img);
        assert_eq!(s.len(), 1, "{s:?}");
        assert!(has(&s[0], [10.0, 10.0], [500.0, 300.0], 1.0), "{s:?}");
        assert_eq!(s[0].clarity, Clarity::Clear);
    }

    #[test]
    fn crossing_segments_are_remerged() {
        let mut img = GrayImage::new(256, 256);
        draw_segment(&mut img, [20.0, 30.0], [230.0, 200.0], 255);
        draw_segment(&mut img, [30.0, 220.0], [220.0, 20.0], 255);
        let s = segs(&img);
        assert_eq!(s.len(), 2, "{s:?}");
        assert!(s.iter().any(|x| has(x, [20.0, 30.0], [230.0, 200.0], 1.5)), "{s:?}");
        assert!(s.iter().any(|x| has(x, [30.0, 220.0], [220.0, 20.0], 1.5)), "{s:?}");
    }

    #[test]
    fn bend_splits_into_two_segments() {
        let mut img = GrayImage::new(256, 256);
        draw_segment(&mut img, [20.0, 200.0], [120.0, 40.5], 255);
        draw_segment(&mut img, [120.0, 40.5], [230.0, 190.0], 255);
        let s = segs(&img);
        assert_eq!(s.len(), 2, "{s:?}");
        assert!(s.iter().any(|x| has(x, [20.0, 200.0], [120.0, 40.5], 1.5)), "{s:?}");
    }

    #[test]
    fn dim_strokes_are_blurred() {
        let mut img = GrayImage::new(128, 128);
        draw_segment(&mut img, [10.0, 10.0], [110.0, 90.0], 77);
        let s = segs(&img);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].clarity, Clarity::Blurred);
    }

    #[test]
    fn thinning_keeps_a_one_pixel_line() {
        let (w, h) = (20, 7);
        let mut mask = vec![false; w * h];
        for y in 2..5 {
            for x in 2..18 {
                mask[y * w + x] = true;
            }
        }
        zhang_suen_thin(&mut mask, w, h);
        for x in 4..16 {
            assert_eq!((0..h).filter(|&y| mask[y * w + x]).count(), 1);
        }
    }
}
