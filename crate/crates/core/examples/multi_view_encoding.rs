// Encode one Tx/Rx pair as images: six RGB scene views with Tx/Rx markers
// and three grayscale path views (xy, xz, yz).

use raydio::bundled;
use raydio::geometry::Point;
use raydio::tracer::{trace_pair, TraceConfig};
use raydio::views::{rasterize_path_views, render_scene_views, PathView, ViewConfig};

pub fn run_example() -> raydio::Result<Vec<std::path::PathBuf>> {
    let scene = bundled::lshape();
    let index = scene.build_index();
    let (tx, rx) = (Point::new(1.0, 0.8, 1.4), Point::new(4.8, 1.6, 1.0));
    let csi = trace_pair(&scene, &index, &tx, &rx, &TraceConfig::default())?;

    let config = ViewConfig::for_scene(&scene, 256);
    println!("{:.4} m per pixel, {} px images", config.meters_per_pixel, config.image_size);
    let scene_views = render_scene_views(&scene, &tx, &rx, &config)?;
    let path_views = rasterize_path_views(&csi.paths, &config)?;
    for v in PathView::ALL {
        let lit = path_views.image(v).pixels().filter(|p| p.0[0] > 0).count();
        println!("{} view: {lit} lit pixels for {} paths", v.tag(), csi.paths.len());
    }

    let dir = std::env::temp_dir().join(format!("raydio-views-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| raydio::Error::Io { path: dir.clone(), source: e })?;
    let mut files = scene_views.save(&dir, "lshape_demo")?;
    files.extend(path_views.save(&dir, "lshape_demo")?);
    println!("wrote {} images to {}", files.len(), dir.display());
    Ok(files)
}

#[allow(dead_code)]
fn main() {
    run_example().expect("encoding failed");
}
