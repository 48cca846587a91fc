use std::io::Write;

use super::{write_out, GenArgs, OutputFormat, PairArgs, RenderArgs, RunConfig, SplitArgs, TraceArgs, EXIT_OK, EXIT_PARTIAL};
use crate::bundled;
use crate::dataset::{self, filter_paths, split_by_tx, Manifest, Split};
use crate::error::{Error, Result};
use crate::tracer::{csi_to_csv, csi_to_json, trace_pair, SpatialCsi};
use crate::views::{rasterize_path_views, render_scene_views, write_atomic, ViewConfig};

fn traced(mut config: RunConfig, pair: &PairArgs) -> Result<(crate::geometry::Scene, SpatialCsi)> {
    if let Some(order) = pair.max_order {
        config.trace.max_order = order;
    }
    if let Some(f) = pair.frequency {
        config.trace.frequency = f;
    }
    let scene = bundled::resolve(&pair.scene)?;
    let index = scene.build_index();
    let csi = trace_pair(&scene, &index, &pair.tx, &pair.rx, &config.trace)?;
    Ok((scene, csi))
}

pub(super) fn trace(config: RunConfig, args: &TraceArgs, out: &mut dyn Write) -> Result<i32> {
    let (_, csi) = traced(config, &args.pair)?;
    let text = match args.format {
        OutputFormat::Json => csi_to_json(&csi)? + "\n",
        OutputFormat::Csv => csi_to_csv(&csi)?,
    };
    match &args.out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => write_out(out, &text)?,
    }
    Ok(EXIT_OK)
}

pub(super) fn render_views(config: RunConfig, args: &RenderArgs, out: &mut dyn Write) -> Result<i32> {
    let max_interactions = config.dataset.max_interactions;
    let image_size = args.image_size.unwrap_or(config.dataset.image_size);
    let gain_floor = config.trace.gain_floor_db;
    let (scene, csi) = traced(config, &args.pair)?;
    let csi = filter_paths(&csi, max_interactions, gain_floor)?;
    let view_config = ViewConfig::for_scene(&scene, image_size);
    std::fs::create_dir_all(&args.out).map_err(super::io_err(&args.out))?;
    let mut written = render_scene_views(&scene, &csi.tx, &csi.rx, &view_config)?.save(&args.out, &args.id)?;
    written.extend(rasterize_path_views(&csi.paths, &view_config)?.save(&args.out, &args.id)?);
    for p in written {
        write_out(out, &format!("{}\n", p.display()))?;
    }
    Ok(EXIT_OK)
}

pub(super) fn gen_dataset(mut config: RunConfig, args: &GenArgs, out: &mut dyn Write) -> Result<i32> {
    let d = &mut config.dataset;
    if let Some(v) = args.seed {
        d.seed = v;
    }
    if let Some(v) = args.image_size {
        d.image_size = v;
    }
    if let Some(v) = &args.scenes {
        d.scenes = v.clone();
    }
    if let Some(v) = args.n_tx {
        d.n_tx = v;
    }
    if let Some(v) = args.n_rx_per_tx {
        d.n_rx_per_tx = v;
    }

    if args.dry_run {
        let planned = dataset::plan(&config.dataset)?;
        let mut total = 0;
        for p in &planned {
            write_out(out, &format!("{}: {} samples\n", p.scene.name, p.samples.len()))?;
            total += p.samples.len();
        }
        write_out(out, &format!("total: {total} samples\n"))?;
        return Ok(EXIT_OK);
    }

    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let provenance = serde_json::to_value(&config).map_err(|e| Error::parse("run config", e))?;
    let (_, summary) = dataset::generate_recorded(&config.dataset, &config.trace, &args.out, jobs, provenance)?;
    let manifest_path = args.out.join(dataset::MANIFEST_FILE);
    write_out(
        out,
        &format!(
            "{}: {} samples, {} rendered, {} skipped, {} failed\n",
            manifest_path.display(),
            summary.total,
            summary.rendered,
            summary.skipped,
            summary.failed
        ),
    )?;
    Ok(if summary.failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

pub(super) fn split(config: RunConfig, args: &SplitArgs, out: &mut dyn Write) -> Result<i32> {
    let manifest = Manifest::load(&args.manifest)?;
    let ratios = match &args.ratios {
        Some(r) => <[f64; 3]>::try_from(r.as_slice())
            .map_err(|_| Error::contract(format!("--ratios needs three values, got {}", r.len())))?,
        None => config.dataset.split_ratios,
    };
    let seed = args.seed.unwrap_or(config.dataset.seed);
    let split = split_by_tx(&manifest, ratios, seed)?;
    split.save(args.out.as_ref().unwrap_or(&args.manifest))?;
    for s in Split::ALL {
        let n = split.records.iter().filter(|r| r.split == s).count();
        write_out(out, &format!("{}: {n}\n", s.name()))?;
    }
    Ok(EXIT_OK)
}
