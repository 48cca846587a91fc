//! Scoring reconstructed polylines against traced paths.

use pathfinding::kuhn_munkres::kuhn_munkres_min;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use super::Polyline;
use crate::geometry::Point;
use crate::tracer::PathRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub predicted: usize,
    pub truth: usize,
    /// Symmetric Hausdorff distance between vertex sets, m.
    pub hausdorff_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMatchReport {
    pub predicted_count: usize,
    pub truth_count: usize,
    pub precision: f64,
    pub recall: f64,
    /// RMS distance over matched vertices, m; `None` when nothing matched.
    pub matched_vertex_rmse: Option<f64>,
    pub assignments: Vec<Assignment>,
    /// Set when the prediction is empty, so precision is vacuous.
    pub zero_support: bool,
}

/// Hausdorff distance between the vertex sets of two polylines.
pub fn hausdorff(a: &[Point], b: &[Point]) -> f64 {
    let directed = |x: &[Point], y: &[Point]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    directed(a, b).max(directed(b, a))
}

/// Squared vertex errors of a matched pair: index-wise (in the better
/// direction) when counts agree, nearest-vertex both ways otherwise.
fn vertex_errors(a: &[Point], b: &[Point]) -> Vec<f64> {
    if a.len() == b.len() {
        let fwd: Vec<f64> = a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).collect();
        let rev: Vec<f64> = a.iter().zip(b.iter().rev()).map(|(p, q)| (p - q).norm_squared()).collect();
        return if fwd.iter().sum::<f64>() <= rev.iter().sum::<f64>() { fwd } else { rev };
    }
    let nearest = |p: &Point, y: &[Point]| y.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min);
    a.iter().map(|p| nearest(p, b)).chain(b.iter().map(|q| nearest(q, a))).collect()
}

/// Optimal one-to-one matching of `predicted` to `truth`. A pair counts as
/// matched when its Hausdorff distance is at most `tolerance_m`.
pub fn match_polylines(predicted: &[Polyline], truth: &[Polyline], tolerance_m: f64) -> PathMatchReport {
    let (np, nt) = (predicted.len(), truth.len());
    let dist: Vec<Vec<f64>> = predicted
        .iter()
        .map(|p| truth.iter().map(|t| hausdorff(p, t)).collect())
        .collect();

    let mut assignments = Vec::new();
    if np > 0 && nt > 0 {
        // Matchable pairs cost less than one, unmatchable pairs exactly one,
        // so the optimum maximizes the match count first.
        const SCALE: f64 = 1e9;
        let denom = tolerance_m.max(f64::MIN_POSITIVE) * (np.max(nt) + 1) as f64;
        let cost = |d: f64| -> i64 {
            if d <= tolerance_m {
                (d / denom * SCALE).round() as i64
            } else {
                SCALE as i64
            }
        };
        let transpose = np > nt;
        let (rows, cols) = if transpose { (nt, np) } else { (np, nt) };
        let values: Vec<i64> = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| if transpose { (c, r) } else { (r, c) }))
            .map(|(p, t)| cost(dist[p][t]))
            .collect();
        let weights = Matrix::from_vec(rows, cols, values).expect("matrix shape");
        let (_, picks) = kuhn_munkres_min(&weights);
        for (r, &c) in picks.iter().enumerate() {
            let (p, t) = if transpose { (c, r) } else { (r, c) };
            if dist[p][t] <= tolerance_m {
                assignments.push(Assignment {
                    predicted: p,
                    truth: t,
                    hausdorff_m: dist[p][t],
                });
            }
        }
        assignments.sort_by_key(|a| a.predicted);
    }

    let errors: Vec<f64> = assignments
        .iter()
        .flat_map(|a| vertex_errors(&predicted[a.predicted], &truth[a.truth]))
        .collect();
    let m = assignments.len() as f64;
    PathMatchReport {
        predicted_count: np,
        truth_count: nt,
        precision: if np == 0 { 1.0 } else { m / np as f64 },
        recall: if nt == 0 { 1.0 } else { m / nt as f64 },
        matched_vertex_rmse: (!errors.is_empty()).then(|| (errors.iter().sum::<f64>() / errors.len() as f64).sqrt()),
        assignments,
        zero_support: np == 0,
    }
}

pub fn match_paths(predicted: &[Polyline], truth: &[PathRecord], tolerance_m: f64) -> PathMatchReport {
    let truth: Vec<Polyline> = truth.iter().map(|p| p.vertices.clone()).collect();
    match_polylines(predicted, &truth, tolerance_m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(pts: &[[f64; 3]]) -> Polyline {
        pts.iter().map(|p| Point::new(p[0], p[1], p[2])).collect()
    }

    fn truth() -> Vec<Polyline> {
        vec![
            poly(&[[0.0, 0.0, 1.0], [3.0, 2.0, 1.0]]),
            poly(&[[0.0, 0.0, 1.0], [1.5, 1.0, 0.0], [3.0, 2.0, 1.0]]),
            poly(&[[0.0, 0.0, 1.0], [1.5, 1.0, 3.0], [3.0, 2.0, 1.0]]),
        ]
    }

    #[test]
    fn identity_matches_everything() {
        let t = truth();
        let r = match_polylines(&t, &t, 0.05);
        assert_eq!((r.precision, r.recall), (1.0, 1.0));
        assert_eq!(r.matched_vertex_rmse, Some(0.0));
        assert!(r.assignments.iter().all(|a| a.predicted == a.truth));
        assert!(!r.zero_support);
    }

    #[test]
    fn empty_prediction_has_zero_support() {
        let r = match_polylines(&[], &truth(), 0.05);
        assert_eq!((r.precision, r.recall), (1.0, 0.0));
        assert!(r.zero_support);
        assert_eq!(r.matched_vertex_rmse, None);
    }

    #[test]
    fn spurious_prediction_lowers_precision() {
        let t = truth();
        let mut pred = vec![t[0].clone(), t[2].clone()];
        pred.push(poly(&[[0.0, 0.0, 1.0], [0.0, 2.0, 2.0], [3.0, 2.0, 1.0]]));
        let r = match_polylines(&pred, &t, 0.05);
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_polyline_still_matches_with_zero_error() {
        let t = truth();
        let mut rev = t[1].clone();
        rev.reverse();
        let r = match_polylines(&[rev], &t, 0.05);
        assert_eq!(r.assignments.len(), 1);
        assert_eq!(r.assignments[0].truth, 1);
        assert_eq!(r.matched_vertex_rmse, Some(0.0));
    }

    #[test]
    fn assignment_prefers_the_closer_partner() {
        let t = truth();
        let shifted: Polyline = t[1].iter().map(|p| p + crate::geometry::Vector::new(0.01, 0.0, 0.0)).collect();
        let r = match_polylines(&[shifted, t[2].clone()], &t, 0.05);
        assert_eq!(r.assignments.len(), 2);
        assert_eq!(r.assignments[0].truth, 1);
        assert!((r.matched_vertex_rmse.unwrap() - (3.0 * 1e-4 / 6.0f64).sqrt()).abs() < 1e-12);
    }
}
