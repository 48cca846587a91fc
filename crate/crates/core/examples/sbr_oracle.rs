// Cross-check the exact image method against shooting-and-bouncing rays.
// The two engines share no path-finding code, so agreement on surface
// sequences and departure directions is an independent check.

use raydio::bundled;
use raydio::geometry::Point;
use raydio::tracer::{compare_with_sbr, image_method_paths, sbr_trace, OracleAgreement, TraceConfig};

pub fn run_example() -> raydio::Result<OracleAgreement> {
    let scene = bundled::office();
    let index = scene.build_index();
    let config = TraceConfig::default();
    let (tx, rx) = (Point::new(2.0, 2.0, 1.5), Point::new(5.5, 4.0, 1.2));

    let started = std::time::Instant::now();
    let exact = image_method_paths(&scene, &index, &tx, &rx, &config)?;
    let launched = sbr_trace(&scene, &index, &tx, &rx, &config)?;
    let agreement = compare_with_sbr(&index, &exact, &launched, config.max_order);

    println!(
        "image method {} paths, SBR ({} rays) {} paths, {} matched in {:?}",
        agreement.exact_count,
        config.sbr_ray_count,
        agreement.sbr_count,
        agreement.matched,
        started.elapsed()
    );
    println!("worst departure error {:.2e} deg", agreement.max_departure_error_deg);
    println!("agree within 1 deg: {}", agreement.agrees(1.0));
    Ok(agreement)
}

#[allow(dead_code)]
fn main() {
    run_example().expect("oracle run failed");
}
