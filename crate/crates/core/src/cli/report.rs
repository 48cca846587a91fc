//! `reconstruct` and `evaluate`: per-sample scoring of path images.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_out, EvaluateArgs, ReconstructArgs, RunConfig, EXIT_OK, EXIT_PARTIAL};
use crate::dataset::{dataset_root, Manifest, SampleRecord, SampleStatus, Split};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::reconstruct::{match_polylines, reconstruct_views, well_separated_polylines, BindFlag, Polyline, ReconstructConfig, Segment2D};
use crate::tracer::csi_from_json;
use crate::views::{write_atomic, PathView, PathViewSet};

/// Minimum projected separation for a sample to count as well separated, px.
pub const WELL_SEPARATED_PX: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub sample_id: String,
    pub scene: String,
    pub tx: [f64; 3],
    pub rx: [f64; 3],
    pub polylines: Vec<Vec<[f64; 3]>>,
    /// Traced paths from the sample's CSI file.
    pub truth: Vec<Vec<[f64; 3]>>,
    pub residual_2d: Vec<Segment2D>,
    pub flags: Vec<BindFlag>,
    pub precision: f64,
    pub recall: f64,
    pub rmse_m: Option<f64>,
    pub rmse_px: Option<f64>,
    /// All traced paths stay [`WELL_SEPARATED_PX`] apart in every view.
    pub well_separated: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReconstructSummary {
    pub samples: usize,
    pub failed: usize,
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub mean_rmse_px: Option<f64>,
    pub well_separated_samples: usize,
    pub well_separated_mean_recall: Option<f64>,
    pub well_separated_mean_precision: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReconstructReport {
    pub summary: ReconstructSummary,
    pub samples: Vec<SampleReport>,
    /// Samples that could not be read, with the reason.
    pub errors: Vec<(String, String)>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl ReconstructSummary {
    pub fn of(samples: &[SampleReport], failed: usize) -> Self {
        let separated: Vec<&SampleReport> = samples.iter().filter(|s| s.well_separated).collect();
        ReconstructSummary {
            samples: samples.len(),
            failed,
            mean_precision: mean(samples.iter().map(|s| s.precision)),
            mean_recall: mean(samples.iter().map(|s| s.recall)),
            mean_rmse_px: mean(samples.iter().filter_map(|s| s.rmse_px)),
            well_separated_samples: separated.len(),
            well_separated_mean_recall: mean(separated.iter().map(|s| s.recall)),
            well_separated_mean_precision: mean(separated.iter().map(|s| s.precision)),
        }
    }

    pub fn table(&self) -> String {
        let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        format!(
            "samples          {}\nfailed           {}\nprecision        {}\nrecall           {}\nrmse_px          {}\nwell_separated   {}\n  precision      {}\n  recall         {}\n",
            self.samples,
            self.failed,
            f(self.mean_precision),
            f(self.mean_recall),
            f(self.mean_rmse_px),
            self.well_separated_samples,
            f(self.well_separated_mean_precision),
            f(self.well_separated_mean_recall),
        )
    }
}

fn selected<'a>(manifest: &'a Manifest, split: Option<Split>) -> impl Iterator<Item = &'a SampleRecord> {
    manifest
        .records
        .iter()
        .filter(move |r| r.status == SampleStatus::Ok && split.is_none_or(|s| r.split == s))
}

fn image_name(sample_id: &str, view: PathView) -> String {
    format!("{sample_id}_{}.png", view.tag())
}

fn has_images(dir: &Path, sample_id: &str) -> bool {
    PathView::ALL.iter().any(|&v| dir.join(image_name(sample_id, v)).exists())
}

fn require_dir(dir: &Path) -> Result<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "no such directory")))
    }
}

fn to_arrays(poly: &[Point]) -> Vec<[f64; 3]> {
    poly.iter().map(|p| [p.x, p.y, p.z]).collect()
}

/// Reconstructs and scores one sample whose images are in `images`.
pub fn reconstruct_sample(
    images: &Path,
    root: &Path,
    manifest: &Manifest,
    record: &SampleRecord,
    config: &ReconstructConfig,
    tolerance_px: f64,
) -> Result<SampleReport> {
    let view_config = manifest
        .view_config(&record.scene)
        .ok_or_else(|| Error::contract(format!("scene {} is not in the manifest header", record.scene)))?
        .clone();
    let mpp = view_config.meters_per_pixel;
    let csi_name = record
        .csi
        .as_ref()
        .ok_or_else(|| Error::contract(format!("{} has no CSI file", record.sample_id)))?;
    let csi_path = root.join(csi_name);
    let csi = csi_from_json(&std::fs::read_to_string(&csi_path).map_err(|e| Error::io(&csi_path, e))?)?;
    let truth: Vec<Polyline> = csi
        .paths
        .iter()
        .map(|p| p.vertices.iter().map(|v| Point::from(*v)).collect())
        .collect();
    let views = PathViewSet::load(images, &record.sample_id, view_config.clone())?;
    let terminals = [Point::from(record.tx), Point::from(record.rx)];
    let result = reconstruct_views(&views, config, &terminals)?;
    let m = match_polylines(&result.polylines, &truth, tolerance_px * mpp);
    let truth_refs: Vec<&[Point]> = truth.iter().map(|p| p.as_slice()).collect();
    Ok(SampleReport {
        sample_id: record.sample_id.clone(),
        scene: record.scene.clone(),
        tx: record.tx,
        rx: record.rx,
        polylines: result.polylines.iter().map(|p| to_arrays(p)).collect(),
        truth: truth.iter().map(|p| to_arrays(p)).collect(),
        residual_2d: result.residual_2d,
        flags: result.flags,
        precision: m.precision,
        recall: m.recall,
        rmse_m: m.matched_vertex_rmse,
        rmse_px: m.matched_vertex_rmse.map(|e| e / mpp),
        well_separated: well_separated_polylines(&truth_refs, &view_config, WELL_SEPARATED_PX),
    })
}

pub(super) fn reconstruct(config: RunConfig, args: &ReconstructArgs, out: &mut dyn Write) -> Result<i32> {
    require_dir(&args.images)?;
    let manifest = Manifest::load(&args.manifest)?;
    let root = dataset_root(&args.manifest);
    let records: Vec<&SampleRecord> = selected(&manifest, args.split)
        .filter(|r| has_images(&args.images, &r.sample_id))
        .collect();
    let results: Vec<Result<SampleReport>> = records
        .par_iter()
        .map(|r| reconstruct_sample(&args.images, &root, &manifest, r, &config.reconstruct, args.tolerance_px))
        .collect();

    let mut report = ReconstructReport::default();
    for (r, res) in records.iter().zip(results) {
        match res {
            Ok(s) => report.samples.push(s),
            Err(e) => {
                log::warn!("{}: {e}", r.sample_id);
                report.errors.push((r.sample_id.clone(), e.to_string()));
            }
        }
    }
    report.summary = ReconstructSummary::of(&report.samples, report.errors.len());
    if let Some(path) = &args.out {
        let text = serde_json::to_string_pretty(&report).map_err(|e| Error::parse("report", e))?;
        write_atomic(path, text.as_bytes())?;
    }
    write_out(out, &report.summary.table())?;
    Ok(if report.errors.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelScore {
    pub sample_id: String,
    /// Mean absolute error on a [0, 1] scale.
    pub mae: f64,
    /// Mean binary cross-entropy with targets as soft labels.
    pub bce: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluateReport {
    pub samples: usize,
    /// Selected samples without a prediction triple.
    pub missing: usize,
    pub failed: usize,
    pub mean_mae: Option<f64>,
    pub mean_bce: Option<f64>,
    pub per_sample: Vec<PixelScore>,
}

const BCE_EPS: f64 = 1e-7;

/// Per-pixel MAE and BCE of a prediction triple against its targets.
pub fn score_pixels(predicted: &[image::GrayImage], target: &[image::GrayImage]) -> Result<(f64, f64)> {
    if predicted.len() != target.len() || predicted.iter().zip(target).any(|(p, t)| p.dimensions() != t.dimensions()) {
        return Err(Error::contract("prediction and target images differ in count or size"));
    }
    let (mut abs, mut bce, mut n) = (0.0, 0.0, 0usize);
    for (p, t) in predicted.iter().zip(target) {
        for (a, b) in p.pixels().zip(t.pixels()) {
            let (y, q) = (b.0[0] as f64 / 255.0, a.0[0] as f64 / 255.0);
            abs += (q - y).abs();
            let q = q.clamp(BCE_EPS, 1.0 - BCE_EPS);
            bce -= y * q.ln() + (1.0 - y) * (1.0 - q).ln();
            n += 1;
        }
    }
    let n = n.max(1) as f64;
    Ok((abs / n, bce / n))
}

fn load_triple(dir: &Path, sample_id: &str) -> Result<Vec<image::GrayImage>> {
    PathView::ALL
        .iter()
        .map(|&v| {
            let path = dir.join(image_name(sample_id, v));
            Ok(image::open(&path).map_err(|e| Error::parse(path.display().to_string(), e))?.to_luma8())
        })
        .collect()
}

pub(super) fn evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<i32> {
    require_dir(&args.predictions)?;
    let manifest = Manifest::load(&args.manifest)?;
    let root = dataset_root(&args.manifest);
    let mut report = EvaluateReport::default();
    for r in selected(&manifest, args.split) {
        if !has_images(&args.predictions, &r.sample_id) {
            report.missing += 1;
            continue;
        }
        let scored = load_triple(&args.predictions, &r.sample_id).and_then(|p| {
            let targets = load_triple(&root.join("targets"), &r.sample_id)?;
            score_pixels(&p, &targets)
        });
        match scored {
            Ok((mae, bce)) => report.per_sample.push(PixelScore {
                sample_id: r.sample_id.clone(),
                mae,
                bce,
            }),
            Err(e) => {
                log::warn!("{}: {e}", r.sample_id);
                report.failed += 1;
            }
        }
    }
    report.samples = report.per_sample.len();
    report.mean_mae = mean(report.per_sample.iter().map(|s| s.mae));
    report.mean_bce = mean(report.per_sample.iter().map(|s| s.bce));
    let summary = serde_json::json!({
        "samples": report.samples,
        "missing": report.missing,
        "failed": report.failed,
        "mean_mae": report.mean_mae,
        "mean_bce": report.mean_bce,
    });
    write_out(out, &format!("{summary}\n"))?;
    if let Some(path) = &args.out {
        let text = serde_json::to_string_pretty(&report).map_err(|e| Error::parse("evaluation", e))?;
        write_atomic(path, text.as_bytes())?;
    }
    Ok(if report.failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, Luma};

    #[test]
    fn identical_binary_images_score_zero() {
        let mut img = GrayImage::new(4, 4);
        img.put_pixel(1, 2, Luma([255]));
        let (mae, bce) = score_pixels(&[img.clone()], &[img]).unwrap();
        assert_eq!(mae, 0.0);
        assert!(bce < 1e-6);
    }

    #[test]
    fn all_grey_prediction_costs_ln_two() {
        let pred = GrayImage::from_pixel(2, 2, Luma([128]));
        let target = GrayImage::new(2, 2);
        let (mae, bce) = score_pixels(&[pred], &[target]).unwrap();
        assert!((mae - 128.0 / 255.0).abs() < 1e-12);
        assert!((bce - (1.0f64 - 128.0 / 255.0).ln().abs()).abs() < 1e-12);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        assert!(score_pixels(&[GrayImage::new(2, 2)], &[GrayImage::new(3, 2)]).is_err());
    }
}
