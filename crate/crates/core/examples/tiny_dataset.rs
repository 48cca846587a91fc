// Generate a small dataset, inspect its manifest and re-split it by
// transmitter.

use raydio::dataset::{generate, split_by_tx, DatasetConfig, Manifest, Split};
use raydio::tracer::TraceConfig;

pub fn run_example() -> raydio::Result<Manifest> {
    let config = DatasetConfig {
        scenes: vec!["shoebox".into(), "office".into()],
        n_tx: 4,
        n_rx_per_tx: 3,
        image_size: 128,
        split_ratios: [0.5, 0.25, 0.25],
        ..Default::default()
    };
    let out = std::env::temp_dir().join(format!("raydio-tiny-dataset-{}", std::process::id()));
    let (manifest, summary) = generate(&config, &TraceConfig::default(), &out, 4)?;
    println!(
        "{} samples ({} rendered, {} reused, {} failed) in {}",
        summary.total,
        summary.rendered,
        summary.skipped,
        summary.failed,
        out.display()
    );
    let first = &manifest.records[0];
    println!("{}: {} paths, inputs {:?}", first.sample_id, first.path_count, first.inputs);

    let resplit = split_by_tx(&manifest, [0.75, 0.25, 0.0], 7)?;
    for s in Split::ALL {
        println!("{}: {} samples", s.name(), resplit.records.iter().filter(|r| r.split == s).count());
    }
    assert!(resplit.leaking_transmitters().is_empty());
    let _ = std::fs::remove_dir_all(&out);
    Ok(manifest)
}

#[allow(dead_code)]
fn main() {
    run_example().expect("dataset generation failed");
}
