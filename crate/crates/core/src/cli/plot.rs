//! Static figures: training loss curves and reconstruction overlays.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::report::{ReconstructReport, SampleReport};
use super::{write_out, PlotArgs, EXIT_OK};
use crate::error::{Error, Result};
use crate::geometry::{Point, Scene};
use crate::reconstruct::point_segment_distance;
use crate::views::{write_png_atomic, PathView, ViewConfig};

pub const TRUTH_COLOR: [u8; 3] = [220, 30, 30];
pub const PREDICTION_COLOR: [u8; 3] = [20, 170, 40];
pub const TRAIN_COLOR: [u8; 3] = [31, 119, 180];
pub const VAL_COLOR: [u8; 3] = [255, 127, 14];
const SCENE_COLOR: [u8; 3] = [150, 150, 150];
const AXIS_COLOR: [u8; 3] = [0, 0, 0];
const GRID_COLOR: [u8; 3] = [225, 225, 225];
const WHITE: Rgb<u8> = Rgb([255, 255, 255]);

/// One line of a training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

pub fn read_loss_log(path: &Path) -> Result<Vec<LossRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| Error::parse(format!("{} line {}", path.display(), n + 1), e)))
        .collect()
}

/// Alpha-blends an anti-aliased line `width` px wide.
fn line(img: &mut RgbImage, a: [f64; 2], b: [f64; 2], color: [u8; 3], width: f64) {
    let (w, h) = img.dimensions();
    let reach = width / 2.0 + 1.0;
    let x0 = (a[0].min(b[0]) - reach).floor().max(0.0) as u32;
    let y0 = (a[1].min(b[1]) - reach).floor().max(0.0) as u32;
    let x1 = ((a[0].max(b[0]) + reach).ceil().max(0.0) as u32).min(w);
    let y1 = ((a[1].max(b[1]) + reach).ceil().max(0.0) as u32).min(h);
    for y in y0..y1 {
        for x in x0..x1 {
            let d = point_segment_distance([x as f64 + 0.5, y as f64 + 0.5], a, b);
            let c = (width / 2.0 + 0.5 - d).clamp(0.0, 1.0);
            if c > 0.0 {
                let px = img.get_pixel_mut(x, y);
                for i in 0..3 {
                    px.0[i] = (px.0[i] as f64 * (1.0 - c) + color[i] as f64 * c).round() as u8;
                }
            }
        }
    }
}

/// Train and validation loss against epoch on a white canvas with a light
/// grid; train in blue, validation in orange.
pub fn render_loss_curve(log: &[LossRecord], width: u32, height: u32) -> Result<RgbImage> {
    if log.is_empty() {
        return Err(Error::contract("training log has no epochs"));
    }
    if log.iter().any(|r| !r.train_loss.is_finite() || !r.val_loss.is_finite()) {
        return Err(Error::contract("training log holds non-finite losses"));
    }
    let mut img = RgbImage::from_pixel(width, height, WHITE);
    let margin = 40.0;
    let (w, h) = (width as f64 - 2.0 * margin, height as f64 - 2.0 * margin);
    let (e0, e1) = log.iter().fold((usize::MAX, 0), |(lo, hi), r| (lo.min(r.epoch), hi.max(r.epoch)));
    let top = log.iter().map(|r| r.train_loss.max(r.val_loss)).fold(0.0, f64::max).max(1e-12) * 1.05;
    let span = (e1 - e0).max(1) as f64;
    let at = |epoch: usize, loss: f64| [margin + (epoch - e0) as f64 / span * w, margin + h - loss.max(0.0) / top * h];

    for k in 0..=5 {
        let y = margin + h * k as f64 / 5.0;
        line(&mut img, [margin, y], [margin + w, y], GRID_COLOR, 1.0);
    }
    line(&mut img, [margin, margin], [margin, margin + h], AXIS_COLOR, 2.0);
    line(&mut img, [margin, margin + h], [margin + w, margin + h], AXIS_COLOR, 2.0);

    let mut sorted = log.to_vec();
    sorted.sort_by_key(|r| r.epoch);
    for (pick, color) in [(0, TRAIN_COLOR), (1, VAL_COLOR)] {
        let pts: Vec<[f64; 2]> = sorted
            .iter()
            .map(|r| at(r.epoch, if pick == 0 { r.train_loss } else { r.val_loss }))
            .collect();
        for s in pts.windows(2) {
            line(&mut img, s[0], s[1], color, 2.5);
        }
        for p in &pts {
            line(&mut img, [p[0] - 2.0, p[1]], [p[0] + 2.0, p[1]], color, 4.0);
        }
    }
    Ok(img)
}

/// Facet edges, skipping diagonals shared by two coplanar triangles.
fn outline(scene: &Scene) -> Vec<[Point; 2]> {
    let key = |p: &Point| [p.x, p.y, p.z].map(|c| (c * 1e6).round() as i64);
    let mut edges: HashMap<([i64; 3], [i64; 3]), (Vec<usize>, [Point; 2])> = HashMap::new();
    for (i, f) in scene.facets().iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f.vertices[k], f.vertices[(k + 1) % 3]);
            let (ka, kb) = (key(&a), key(&b));
            let id = if ka <= kb { (ka, kb) } else { (kb, ka) };
            edges.entry(id).or_insert_with(|| (Vec::new(), [a, b])).0.push(i);
        }
    }
    let mut out: Vec<(([i64; 3], [i64; 3]), [Point; 2])> = edges
        .into_iter()
        .filter(|(_, (owners, _))| {
            let coplanar_pair = owners.len() == 2 && {
                let (f, g) = (&scene.facets()[owners[0]], &scene.facets()[owners[1]]);
                f.normal().dot(&g.normal()) > 1.0 - 1e-9
            };
            !coplanar_pair
        })
        .map(|(k, (_, e))| (k, e))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out.into_iter().map(|(_, e)| e).collect()
}

/// Three projections (xy, xz, yz) side by side: scene edges in grey, traced
/// paths in red, reconstructed paths in green on top.
pub fn render_overlay(scene: &Scene, sample: &SampleReport, panel: u32) -> Result<RgbImage> {
    let config = ViewConfig::for_scene(scene, panel);
    config.validate()?;
    let mut img = RgbImage::from_pixel(panel * 3, panel, WHITE);
    let edges = outline(scene);
    for (k, view) in PathView::ALL.iter().enumerate() {
        let dx = (k as u32 * panel) as f64;
        let px = |p: &Point| {
            let [c, r] = config.to_pixel(view.axes(), p);
            [c + dx, r]
        };
        for e in &edges {
            line(&mut img, px(&e[0]), px(&e[1]), SCENE_COLOR, 2.0);
        }
        for (polys, color) in [(&sample.truth, TRUTH_COLOR), (&sample.polylines, PREDICTION_COLOR)] {
            for poly in polys {
                for s in poly.windows(2) {
                    line(&mut img, px(&Point::from(s[0])), px(&Point::from(s[1])), color, 3.0);
                }
            }
        }
        if k > 0 {
            line(&mut img, [dx, 0.0], [dx, panel as f64], AXIS_COLOR, 1.0);
        }
    }
    Ok(img)
}

pub(super) fn plot(args: &PlotArgs, out: &mut dyn Write) -> Result<i32> {
    let mut written = Vec::new();
    if let Some(log_path) = &args.loss_log {
        let log = read_loss_log(log_path)?;
        let img = render_loss_curve(&log, 800, 500)?;
        std::fs::create_dir_all(&args.out).map_err(super::io_err(&args.out))?;
        let path = args.out.join("loss.png");
        write_png_atomic(&path, &img)?;
        written.push(path);
    }
    if let Some(report_path) = &args.report {
        let text = std::fs::read_to_string(report_path).map_err(|e| Error::io(report_path, e))?;
        let report: ReconstructReport = serde_json::from_str(&text).map_err(|e| Error::parse(report_path.display().to_string(), e))?;
        let samples: Vec<&SampleReport> = report
            .samples
            .iter()
            .filter(|s| args.sample.as_ref().is_none_or(|id| &s.sample_id == id))
            .collect();
        if let Some(id) = &args.sample {
            if samples.is_empty() {
                return Err(Error::contract(format!("sample {id} is not in the report")));
            }
        }
        std::fs::create_dir_all(&args.out).map_err(super::io_err(&args.out))?;
        let mut scenes: HashMap<&str, Scene> = HashMap::new();
        for s in samples {
            if !scenes.contains_key(s.scene.as_str()) {
                scenes.insert(&s.scene, crate::bundled::resolve(&s.scene)?);
            }
            let img = render_overlay(&scenes[s.scene.as_str()], s, args.size)?;
            let path = args.out.join(format!("{}_overlay.png", s.sample_id));
            write_png_atomic(&path, &img)?;
            written.push(path);
        }
    }
    for p in written {
        write_out(out, &format!("{}\n", p.display()))?;
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn loss_curve_draws_both_series() {
        let log: Vec<LossRecord> = (1..=10)
            .map(|e| LossRecord {
                epoch: e,
                train_loss: 1.0 / e as f64,
                val_loss: 1.2 / e as f64,
            })
            .collect();
        let img = render_loss_curve(&log, 400, 300).unwrap();
        let has = |c: [u8; 3]| img.pixels().any(|p| p.0 == c);
        assert!(has(TRAIN_COLOR) && has(VAL_COLOR));
        assert!(render_loss_curve(&[], 400, 300).is_err());
    }

    #[test]
    fn overlay_shows_truth_and_prediction_in_their_colors() {
        let scene = bundled::shoebox();
        let truth = vec![[1.0, 1.0, 1.0], [4.0, 3.0, 1.5]];
        let pred = vec![[1.0, 1.0, 1.2], [4.0, 3.0, 1.7]];
        let sample = SampleReport {
            sample_id: "s".into(),
            scene: scene.name.clone(),
            tx: truth[0],
            rx: truth[1],
            polylines: vec![pred],
            truth: vec![truth],
            residual_2d: vec![],
            flags: vec![],
            precision: 1.0,
            recall: 1.0,
            rmse_m: None,
            rmse_px: None,
            well_separated: true,
        };
        let img = render_overlay(&scene, &sample, 256).unwrap();
        assert_eq!(img.dimensions(), (768, 256));
        let count = |c: [u8; 3]| img.pixels().filter(|p| p.0 == c).count();
        assert!(count(TRUTH_COLOR) > 50, "xz and yz separate the two lines");
        assert!(count(PREDICTION_COLOR) > 100);
        assert!(count(SCENE_COLOR) > 100);
    }

    #[test]
    fn quad_diagonals_are_not_outlined() {
        // six walls of a box, each two triangles: 12 box edges remain
        assert_eq!(outline(&bundled::shoebox()).len() % 12, 0);
        let edges = outline(&bundled::shoebox());
        assert!(edges.iter().all(|[a, b]| {
            let d = b - a;
            [d.x, d.y, d.z].iter().filter(|c| c.abs() > 1e-9).count() == 1
        }));
    }
}
