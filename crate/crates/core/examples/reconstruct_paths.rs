// Round trip: trace, rasterize the three path views, then recover 3D
// polylines from the images alone and score them against the traced paths.

use raydio::bundled;
use raydio::geometry::Point;
use raydio::reconstruct::{match_paths, reconstruct_views, well_separated_subset, PathMatchReport, ReconstructConfig};
use raydio::tracer::{trace_pair, TraceConfig};
use raydio::views::{rasterize_path_views, ViewConfig};

pub fn run_example() -> raydio::Result<PathMatchReport> {
    let scene = bundled::shoebox();
    let index = scene.build_index();
    let (tx, rx) = (Point::new(2.1, 0.6, 1.3), Point::new(3.53, 3.52, 1.83));
    let mut paths = trace_pair(&scene, &index, &tx, &rx, &TraceConfig::default())?.paths;
    paths.sort_by(|a, b| b.amplitude().unwrap_or(0.0).total_cmp(&a.amplitude().unwrap_or(0.0)));

    let config = ViewConfig::for_scene(&scene, 1024);
    // keep paths the images can tell apart
    let kept = well_separated_subset(&paths, &config, 6.0);
    println!("{} traced, {} well separated", paths.len(), kept.len());

    let views = rasterize_path_views(&kept, &config)?;
    let result = reconstruct_views(&views, &ReconstructConfig::default(), &[tx, rx])?;
    for (i, poly) in result.polylines.iter().enumerate() {
        let pts: Vec<String> = poly.iter().map(|p| format!("({:.2}, {:.2}, {:.2})", p.x, p.y, p.z)).collect();
        println!("  path {i}: {}", pts.join(" → "));
    }
    let report = match_paths(&result.polylines, &kept, 3.0 * config.meters_per_pixel);
    println!(
        "precision {:.2}  recall {:.2}  vertex RMSE {:.2} px",
        report.precision,
        report.recall,
        report.matched_vertex_rmse.unwrap_or(f64::NAN) / config.meters_per_pixel
    );
    Ok(report)
}

#[allow(dead_code)]
fn main() {
    run_example().expect("reconstruction failed");
}
