// Trace every specular path between one transmitter and one receiver in a
// bundled room and print the spatial CSI.
//
// ```bash
// cargo run --release --example trace_pair
// ```

use raydio::bundled;
use raydio::geometry::Point;
use raydio::tracer::{csi_to_json, trace_pair, SpatialCsi, TraceConfig};

pub fn run_example() -> raydio::Result<SpatialCsi> {
    let scene = bundled::shoebox();
    let index = scene.build_index();
    let tx = Point::new(1.0, 1.0, 1.0);
    let rx = Point::new(4.0, 3.0, 1.5);
    let csi = trace_pair(&scene, &index, &tx, &rx, &TraceConfig::default())?;

    println!("{} paths, strongest first by delay:", csi.paths.len());
    for p in &csi.paths {
        let ch = p.channel.expect("traced paths are characterized");
        println!(
            "  order {}  {:6.3} m  {:7.3} ns  {:7.2} dB  facets {:?}",
            p.order(),
            p.length,
            p.delay * 1e9,
            ch.gain_db(),
            p.facet_sequence()
        );
    }
    println!("aggregate |h_perp| = {:.3e}", csi.aggregate_gain.perp.norm());
    let json = csi_to_json(&csi)?;
    println!("CSI JSON is {} bytes", json.len());
    Ok(csi)
}

#[allow(dead_code)]
fn main() {
    run_example().expect("trace failed");
}
