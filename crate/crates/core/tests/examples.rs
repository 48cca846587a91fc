//! Every example runs and produces what it claims.

macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }
    };
}

example!(trace_pair);
example!(sbr_oracle);
example!(channel_physics);
example!(custom_scene);
example!(multi_view_encoding);
example!(reconstruct_paths);
example!(tiny_dataset);
example!(cli_pipeline);
example!(training_figures);

#[test]
fn trace_pair_finds_the_direct_path() {
    let csi = trace_pair::run_example().unwrap();
    assert_eq!(csi.paths.iter().filter(|p| p.order() == 0).count(), 1);
    assert!(csi.paths.len() > 1);
}

#[test]
fn sbr_oracle_agrees() {
    let a = sbr_oracle::run_example().unwrap();
    assert!(a.agrees(1.0), "{a:?}");
}

#[test]
fn channel_physics_matches_closed_forms() {
    let f = channel_physics::run_example().unwrap();
    assert!((f.fspl_1m_db - 40.05).abs() < 0.01);
    assert!((f.normal_incidence - 1.0 / 3.0).abs() < 1e-12);
    assert!(f.brewster_par < 1e-6);
}

#[test]
fn custom_scene_round_trips_and_traces() {
    // LoS, six first-order and some second-order paths in a closed box
    assert!(custom_scene::run_example().unwrap() >= 7);
}

#[test]
fn multi_view_encoding_writes_nine_images() {
    let files = multi_view_encoding::run_example().unwrap();
    assert_eq!(files.len(), 9);
    assert!(files.iter().all(|f| f.exists()));
    let _ = std::fs::remove_dir_all(files[0].parent().unwrap());
}

#[test]
fn reconstruct_paths_recovers_everything() {
    let r = reconstruct_paths::run_example().unwrap();
    assert_eq!(r.recall, 1.0);
    assert_eq!(r.precision, 1.0);
    assert!(r.truth_count >= 3);
}

#[test]
fn tiny_dataset_has_every_sample() {
    let m = tiny_dataset::run_example().unwrap();
    assert_eq!(m.records.len(), 24);
    assert!(m.leaking_transmitters().is_empty());
}

#[test]
fn cli_pipeline_exits_cleanly() {
    assert_eq!(cli_pipeline::run_example().unwrap(), vec![0, 0, 0]);
}

#[test]
fn training_figures_render() {
    let (curve, overlay) = training_figures::run_example().unwrap();
    assert_eq!(curve.dimensions(), (800, 500));
    assert_eq!(overlay.dimensions(), (3 * 384, 384));
}
