//! Per-sample export and the resumable, parallel generation driver.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{split_by_tx, Manifest, ManifestHeader, SampleRecord, SampleStatus, SceneEntry, Split, SplitRule};
use super::{filter_paths, sample_positions, DatasetConfig, SampleSpec, MANIFEST_FORMAT};
use crate::error::{Error, Result};
use crate::geometry::{Scene, SpatialIndex};
use crate::tracer::{csi_from_json, csi_to_json, trace_pair, SpatialCsi, TraceConfig};
use crate::views::{rasterize_path_views, render_scene_views, write_atomic, PathView, SceneView, ViewConfig};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Output files of one sample, relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleFiles {
    pub inputs: Vec<String>,
    pub targets: Vec<String>,
    pub csi: String,
}

impl SampleFiles {
    pub fn for_id(sample_id: &str) -> Self {
        SampleFiles {
            inputs: SceneView::ALL
                .iter()
                .map(|v| format!("inputs/{sample_id}_{}.png", v.tag()))
                .collect(),
            targets: PathView::ALL
                .iter()
                .map(|v| format!("targets/{sample_id}_{}.png", v.tag()))
                .collect(),
            csi: format!("csi/{sample_id}.json"),
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &String> {
        self.inputs.iter().chain(&self.targets).chain(std::iter::once(&self.csi))
    }
}

/// Counts from one [`generate`] run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub total: usize,
    pub rendered: usize,
    /// Already complete on disk from an earlier run.
    pub skipped: usize,
    pub failed: usize,
}

/// A scene resolved for generation together with its sampled pairs.
#[derive(Debug, Clone)]
pub struct PlannedScene {
    pub scene: Scene,
    pub view_config: ViewConfig,
    pub samples: Vec<SampleSpec>,
}

/// Resolves scenes and samples positions without tracing or writing.
pub fn plan(config: &DatasetConfig) -> Result<Vec<PlannedScene>> {
    if config.scenes.is_empty() {
        return Err(Error::contract("dataset config lists no scenes"));
    }
    let mut planned: Vec<PlannedScene> = Vec::with_capacity(config.scenes.len());
    for spec in &config.scenes {
        let scene = crate::bundled::resolve(spec)?;
        if planned.iter().any(|p| p.scene.name == scene.name) {
            return Err(Error::contract(format!("scene name {:?} appears twice", scene.name)));
        }
        let view_config = ViewConfig::for_scene(&scene, config.image_size);
        view_config.validate()?;
        let samples = sample_positions(&scene, config.n_tx, config.n_rx_per_tx, config.seed, &config.constraints)?;
        planned.push(PlannedScene {
            scene,
            view_config,
            samples,
        });
    }
    Ok(planned)
}

/// Traced paths for one sample after the interaction and gain filters.
pub fn sample_paths(
    scene: &Scene,
    index: &SpatialIndex,
    spec: &SampleSpec,
    trace: &TraceConfig,
    max_interactions: usize,
) -> Result<SpatialCsi> {
    let csi = trace_pair(scene, index, &spec.tx_point(), &spec.rx_point(), trace)?;
    filter_paths(&csi, max_interactions, trace.gain_floor_db)
}

fn record(spec: &SampleSpec, status: SampleStatus, path_count: usize, error: Option<String>) -> SampleRecord {
    let files = SampleFiles::for_id(&spec.sample_id);
    let ok = status == SampleStatus::Ok;
    SampleRecord {
        sample_id: spec.sample_id.clone(),
        scene: spec.scene_name.clone(),
        tx_index: spec.tx_index,
        rx_index: spec.rx_index,
        tx: spec.tx,
        rx: spec.rx,
        seed: spec.seed,
        split: Split::Train,
        status,
        path_count,
        inputs: if ok { files.inputs } else { Vec::new() },
        targets: if ok { files.targets } else { Vec::new() },
        csi: ok.then_some(files.csi),
        error,
    }
}

/// Path count of a sample whose files are all present and well formed.
fn existing(root: &Path, spec: &SampleSpec, size: u32) -> Option<usize> {
    let files = SampleFiles::for_id(&spec.sample_id);
    for f in files.inputs.iter().chain(&files.targets) {
        match image::image_dimensions(root.join(f)) {
            Ok((w, h)) if w == size && h == size => {}
            _ => return None,
        }
    }
    let csi = csi_from_json(&fs::read_to_string(root.join(&files.csi)).ok()?).ok()?;
    (csi.tx == spec.tx && csi.rx == spec.rx).then_some(csi.paths.len())
}

fn export(root: &Path, planned: &PlannedScene, index: &SpatialIndex, spec: &SampleSpec, config: &DatasetConfig, trace: &TraceConfig) -> Result<usize> {
    let csi = sample_paths(&planned.scene, index, spec, trace, config.max_interactions)?;
    let scene_views = render_scene_views(&planned.scene, &csi.tx, &csi.rx, &planned.view_config)?;
    let path_views = rasterize_path_views(&csi.paths, &planned.view_config)?;
    scene_views.save(&root.join("inputs"), &spec.sample_id)?;
    path_views.save(&root.join("targets"), &spec.sample_id)?;
    let csi_path = root.join(SampleFiles::for_id(&spec.sample_id).csi);
    write_atomic(&csi_path, csi_to_json(&csi)?.as_bytes())?;
    Ok(csi.paths.len())
}

/// Traces, renders and writes every planned sample under `out_dir`, then
/// writes `manifest.jsonl` last. Samples already complete on disk are kept.
/// A failing sample is recorded as failed and the run continues. Output
/// bytes do not depend on `jobs`.
pub fn generate(config: &DatasetConfig, trace: &TraceConfig, out_dir: &Path, jobs: usize) -> Result<(Manifest, GenerateSummary)> {
    let provenance = serde_json::json!({ "dataset": config, "trace": trace });
    generate_recorded(config, trace, out_dir, jobs, provenance)
}

/// [`generate`] storing `provenance` as the manifest header's `config`.
pub fn generate_recorded(
    config: &DatasetConfig,
    trace: &TraceConfig,
    out_dir: &Path,
    jobs: usize,
    provenance: serde_json::Value,
) -> Result<(Manifest, GenerateSummary)> {
    trace.validate()?;
    let planned = plan(config)?;
    for sub in ["inputs", "targets", "csi"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::contract(format!("thread pool: {e}")))?;

    let mut summary = GenerateSummary::default();
    let mut records = Vec::new();
    for p in &planned {
        let index = p.scene.build_index();
        let results: Vec<(SampleRecord, bool)> = pool.install(|| {
            p.samples
                .par_iter()
                .map(|spec| {
                    if let Some(n) = existing(out_dir, spec, p.view_config.image_size) {
                        return (record(spec, SampleStatus::Ok, n, None), true);
                    }
                    match export(out_dir, p, &index, spec, config, trace) {
                        Ok(n) => (record(spec, SampleStatus::Ok, n, None), false),
                        Err(e) => {
                            log::warn!("sample {} failed: {e}", spec.sample_id);
                            (record(spec, SampleStatus::Failed, 0, Some(e.to_string())), false)
                        }
                    }
                })
                .collect()
        });
        for (r, skipped) in results {
            match (r.status, skipped) {
                (SampleStatus::Failed, _) => summary.failed += 1,
                (_, true) => summary.skipped += 1,
                (_, false) => summary.rendered += 1,
            }
            records.push(r);
        }
        log::info!("{}: {} samples", p.scene.name, p.samples.len());
    }
    records.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    summary.total = records.len();

    let unsplit = Manifest {
        header: ManifestHeader {
            format: MANIFEST_FORMAT.into(),
            scenes: planned
                .iter()
                .map(|p| SceneEntry {
                    name: p.scene.name.clone(),
                    view_config: p.view_config.clone(),
                })
                .collect(),
            config: provenance,
            split: SplitRule {
                rule: "by_tx".into(),
                ratios: [1.0, 0.0, 0.0],
                seed: config.seed,
            },
        },
        records,
    };
    let manifest = match split_by_tx(&unsplit, config.split_ratios, config.seed) {
        Ok(m) => m,
        Err(e) => {
            log::warn!("{e}; every sample stays in train");
            unsplit
        }
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok((manifest, summary))
}

/// Directory holding the manifest, for resolving its relative file paths.
pub fn dataset_root(manifest_path: &Path) -> PathBuf {
    manifest_path.parent().map(Path::to_path_buf).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(scenes: &[&str]) -> DatasetConfig {
        DatasetConfig {
            scenes: scenes.iter().map(|s| s.to_string()).collect(),
            n_tx: 2,
            n_rx_per_tx: 5,
            image_size: 96,
            split_ratios: [0.5, 0.5, 0.0],
            ..Default::default()
        }
    }

    fn read_all(root: &Path) -> Vec<(String, Vec<u8>)> {
        let mut out = Vec::new();
        for sub in ["inputs", "targets", "csi"] {
            for e in fs::read_dir(root.join(sub)).unwrap() {
                let p = e.unwrap().path();
                out.push((format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), fs::read(&p).unwrap()));
            }
        }
        out.push((MANIFEST_FILE.into(), fs::read(root.join(MANIFEST_FILE)).unwrap()));
        out.sort();
        out
    }

    #[test]
    fn writes_every_file_and_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny(&["shoebox", "lshape"]);
        let (m, s) = generate(&config, &TraceConfig::default(), dir.path(), 2).unwrap();
        assert_eq!(s, GenerateSummary { total: 20, rendered: 20, skipped: 0, failed: 0 });
        assert_eq!(m.records.len(), 20);
        let files = read_all(dir.path());
        assert_eq!(files.len(), 20 * 10 + 1);
        assert!(m.leaking_transmitters().is_empty());
        for r in &m.records {
            let targets = load_targets(dir.path(), r, m.view_config(&r.scene).unwrap());
            let black = targets.iter().all(|img| img.pixels().all(|p| p.0[0] == 0));
            assert_eq!(black, r.path_count == 0, "{}", r.sample_id);
        }

        let (m2, s2) = generate(&config, &TraceConfig::default(), dir.path(), 1).unwrap();
        assert_eq!(s2.skipped, 20);
        assert_eq!(m2, m);
        assert_eq!(read_all(dir.path()), files);
    }

    fn load_targets(root: &Path, r: &SampleRecord, vc: &ViewConfig) -> Vec<image::GrayImage> {
        crate::views::PathViewSet::load(&root.join("targets"), &r.sample_id, vc.clone()).unwrap().images
    }

    #[test]
    fn job_count_does_not_change_output() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let config = tiny(&["office"]);
        generate(&config, &TraceConfig::default(), a.path(), 1).unwrap();
        generate(&config, &TraceConfig::default(), b.path(), 8).unwrap();
        assert_eq!(read_all(a.path()), read_all(b.path()));
    }

    #[test]
    fn a_damaged_sample_is_regenerated() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny(&["shoebox"]);
        let (m, _) = generate(&config, &TraceConfig::default(), dir.path(), 2).unwrap();
        let victim = dir.path().join(&m.records[3].targets[1]);
        fs::write(&victim, b"not a png").unwrap();
        let (_, s) = generate(&config, &TraceConfig::default(), dir.path(), 2).unwrap();
        assert_eq!((s.rendered, s.skipped), (1, 9));
        assert!(image::image_dimensions(&victim).is_ok());
    }
}
