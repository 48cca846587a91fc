use proptest::prelude::*;
use raydio::bundled;
use raydio::channel::{free_space_amplitude, fresnel_reflection};
use raydio::dataset::{inside_scene, sample_positions, SamplingConstraints};
use raydio::geometry::{Material, Point, Scene, Vector};
use raydio::tracer::{trace_pair, TraceConfig};

fn shoebox_point() -> impl Strategy<Value = Point> {
    (0.3..4.7f64, 0.3..3.7f64, 0.3..2.7f64).prop_map(|(x, y, z)| Point::new(x, y, z))
}

fn direction() -> impl Strategy<Value = Vector> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("non-degenerate", |(x, y, z)| x * x + y * y + z * z > 1e-3)
        .prop_map(|(x, y, z)| Vector::new(x, y, z).normalize())
}

fn shoebox() -> Scene {
    bundled::shoebox()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bvh_agrees_with_brute_force(origin in shoebox_point(), dir in direction()) {
        let scene = bundled::office();
        let index = scene.build_index();
        let fast = index.intersect_first(&origin, &dir, 1e-6, f64::INFINITY).unwrap();
        let slow = index.intersect_brute_force(&origin, &dir, 1e-6, f64::INFINITY);
        match (fast, slow) {
            (Some(a), Some(b)) => prop_assert!((a.distance - b.distance).abs() < 1e-9),
            (a, b) => prop_assert_eq!(a.is_some(), b.is_some()),
        }
    }

    #[test]
    fn reflections_obey_the_mirror_law(tx in shoebox_point(), rx in shoebox_point()) {
        prop_assume!((tx - rx).norm() > 0.1);
        let scene = shoebox();
        let csi = trace_pair(&scene, &scene.build_index(), &tx, &rx, &TraceConfig::default()).unwrap();
        for p in &csi.paths {
            for (k, hit) in p.interactions.iter().enumerate() {
                let facet = scene.facet(hit.facet_id).unwrap();
                prop_assert!(facet.distance_to(&hit.point) < 1e-7);
                let n = facet.normal();
                let into = (hit.point - p.vertices[k]).normalize();
                let out = (p.vertices[k + 2] - hit.point).normalize();
                prop_assert!((into.dot(&n) + out.dot(&n)).abs() < 1e-7);
                prop_assert!((into - out).cross(&n).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn swapping_ends_preserves_gains(tx in shoebox_point(), rx in shoebox_point()) {
        prop_assume!((tx - rx).norm() > 0.1);
        let scene = shoebox();
        let index = scene.build_index();
        let config = TraceConfig { gain_floor_db: f64::NEG_INFINITY, ..TraceConfig::default() };
        let fwd = trace_pair(&scene, &index, &tx, &rx, &config).unwrap();
        let back = trace_pair(&scene, &index, &rx, &tx, &config).unwrap();
        prop_assert_eq!(fwd.paths.len(), back.paths.len());
        for p in &fwd.paths {
            let mut seq = p.facet_sequence();
            seq.reverse();
            let q = back.paths.iter().find(|q| q.facet_sequence() == seq);
            prop_assert!(q.is_some(), "no reverse of {:?}", p.facet_sequence());
            let (a, b) = (p.channel.unwrap().gain, q.unwrap().channel.unwrap().gain);
            prop_assert!((a.perp.norm() - b.perp.norm()).abs() <= 1e-9 * a.perp.norm().max(1e-300));
            prop_assert!((a.par.norm() - b.par.norm()).abs() <= 1e-9 * a.par.norm().max(1e-300));
            prop_assert!((p.length - q.unwrap().length).abs() < 1e-9);
        }
    }

    #[test]
    fn paths_never_beat_free_space(tx in shoebox_point(), rx in shoebox_point()) {
        prop_assume!((tx - rx).norm() > 0.1);
        let scene = shoebox();
        let config = TraceConfig::default();
        let csi = trace_pair(&scene, &scene.build_index(), &tx, &rx, &config).unwrap();
        for p in &csi.paths {
            let bound = free_space_amplitude(p.length, config.frequency).unwrap();
            prop_assert!(p.amplitude().unwrap() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn fresnel_coefficients_are_passive(angle in 0.0..1.5707f64, er in 1.0..20.0f64, sigma in 0.0..10.0f64, f in 1e8..1e11f64) {
        let (perp, par) = fresnel_reflection(angle, &Material::new("m", er, sigma, [0; 3]), f).unwrap();
        prop_assert!(perp.norm() <= 1.0 + 1e-12 && par.norm() <= 1.0 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sampled_positions_respect_constraints(seed in any::<u64>(), which in 0usize..3) {
        let scene = &bundled::all()[which];
        let c = SamplingConstraints::default();
        let floor = scene.bounds().min.z;
        for s in sample_positions(scene, 3, 4, seed, &c).unwrap() {
            for p in [s.tx_point(), s.rx_point()] {
                prop_assert!(inside_scene(scene, &p));
                prop_assert!(scene.clearance(&p) >= c.min_clearance - 1e-12);
                prop_assert!(p.z - floor >= c.height_range[0] - 1e-12 && p.z - floor <= c.height_range[1] + 1e-12);
            }
            prop_assert!((s.tx_point() - s.rx_point()).norm() >= c.min_tx_rx_distance - 1e-12);
        }
    }
}
