// Author a scene from quads, save it as JSON, load it back and trace in it.

use raydio::geometry::{load_scene, save_scene, split_quad, Material, Point, Scene};
use raydio::tracer::{trace_pair, TraceConfig};

fn quad(c: [[f64; 3]; 4], material: usize) -> [raydio::geometry::Facet; 2] {
    split_quad(c.map(|p| Point::new(p[0], p[1], p[2])), material)
}

/// A 4 × 3 × 2.5 m room with a concrete floor, drywall walls and a metal
/// ceiling.
pub fn corridor() -> raydio::Result<Scene> {
    let materials = vec![
        Material::new("concrete", 5.31, 0.0921, [160, 160, 160]),
        Material::new("drywall", 2.7, 0.0143, [230, 220, 200]),
        Material::new("metal", 1.0, 1e7, [90, 90, 110]),
    ];
    let (x, y, z) = (4.0, 3.0, 2.5);
    let faces = [
        ([[0., 0., 0.], [x, 0., 0.], [x, y, 0.], [0., y, 0.]], 0),
        ([[0., 0., z], [0., y, z], [x, y, z], [x, 0., z]], 2),
        ([[0., 0., 0.], [0., 0., z], [x, 0., z], [x, 0., 0.]], 1),
        ([[0., y, 0.], [x, y, 0.], [x, y, z], [0., y, z]], 1),
        ([[0., 0., 0.], [0., y, 0.], [0., y, z], [0., 0., z]], 1),
        ([[x, 0., 0.], [x, 0., z], [x, y, z], [x, y, 0.]], 1),
    ];
    let facets = faces.iter().flat_map(|(c, m)| quad(*c, *m)).collect();
    Scene::new("corridor", materials, facets)
}

pub fn run_example() -> raydio::Result<usize> {
    let scene = corridor()?;
    let dir = std::env::temp_dir().join(format!("raydio-custom-scene-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| raydio::Error::Io { path: dir.clone(), source: e })?;
    let path = dir.join("corridor.json");
    save_scene(&scene, &path)?;
    let loaded = load_scene(&path)?;
    assert_eq!(loaded.facets().len(), scene.facets().len());
    println!("{} facets written to {}", loaded.facets().len(), path.display());

    let index = loaded.build_index();
    let csi = trace_pair(&loaded, &index, &Point::new(0.5, 1.5, 1.2), &Point::new(3.5, 1.0, 1.6), &TraceConfig::default())?;
    let by_order = (0..=2).map(|k| csi.paths.iter().filter(|p| p.order() == k).count()).collect::<Vec<_>>();
    println!("paths by order (LoS, 1, 2): {by_order:?}");
    let _ = std::fs::remove_dir_all(&dir);
    Ok(csi.paths.len())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("custom scene example failed");
}
