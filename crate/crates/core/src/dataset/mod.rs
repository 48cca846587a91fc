//! Dataset generation: position sampling, path filtering, per-sample export
//! and Tx-based splits.

mod generate;
mod manifest;

pub use generate::{dataset_root, generate, generate_recorded, plan, sample_paths, GenerateSummary, PlannedScene, SampleFiles, MANIFEST_FILE};
pub use manifest::{split_by_tx, Manifest, ManifestHeader, SampleRecord, SampleStatus, SceneEntry, Split, SplitRule, MANIFEST_FORMAT};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Scene, Vector};
use crate::tracer::{apply_gain_floor, SpatialCsi};

/// Rejection attempts per point before sampling gives up.
pub const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConstraints {
    /// Smallest distance from any facet, m.
    pub min_clearance: f64,
    pub min_tx_rx_distance: f64,
    /// Allowed heights above the scene floor (bounds minimum z), m.
    pub height_range: [f64; 2],
}

impl Default for SamplingConstraints {
    fn default() -> Self {
        SamplingConstraints {
            min_clearance: 0.1,
            min_tx_rx_distance: 0.5,
            height_range: [0.5, 2.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Bundled scene names or scene file paths.
    pub scenes: Vec<String>,
    pub n_tx: usize,
    pub n_rx_per_tx: usize,
    pub seed: u64,
    pub image_size: u32,
    pub max_interactions: usize,
    pub constraints: SamplingConstraints,
    /// Train, validation and test fractions.
    pub split_ratios: [f64; 3],
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            scenes: crate::bundled::NAMES.iter().map(|s| s.to_string()).collect(),
            n_tx: 15,
            n_rx_per_tx: 200,
            seed: 42,
            image_size: 1024,
            max_interactions: 2,
            constraints: SamplingConstraints::default(),
            split_ratios: [0.8, 0.1, 0.1],
        }
    }
}

/// One Tx/Rx pair to export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub sample_id: String,
    pub scene_name: String,
    pub tx_index: usize,
    pub rx_index: usize,
    pub tx: [f64; 3],
    pub rx: [f64; 3],
    pub seed: u64,
}

impl SampleSpec {
    pub fn tx_point(&self) -> Point {
        Point::from(self.tx)
    }

    pub fn rx_point(&self) -> Point {
        Point::from(self.rx)
    }
}

pub fn sample_id(scene_name: &str, tx_index: usize, rx_index: usize) -> String {
    format!("{scene_name}_t{tx_index:03}_r{rx_index:04}")
}

/// FNV-1a, used to derive stable per-scene and per-sample seeds.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut key = seed.to_le_bytes().to_vec();
    for p in parts {
        key.push(0);
        key.extend_from_slice(p.as_bytes());
    }
    fnv1a(&key)
}

/// Whether `p` is enclosed by the scene: a ray cast from it along each of
/// six slightly skewed axis directions crosses an odd number of facets.
/// Points inside closed furniture or outside an L-shaped floor plan fail.
pub fn inside_scene(scene: &Scene, p: &Point) -> bool {
    const SKEW: [f64; 3] = [0.017_453, 0.031_415, 0.027_182];
    (0..3).all(|axis| {
        [1.0, -1.0].iter().all(|&sign| {
            let mut d = Vector::new(SKEW[0], SKEW[1], SKEW[2]);
            d[axis] = sign;
            let d = d.normalize();
            let crossings = scene
                .facets()
                .iter()
                .filter(|f| f.intersect(p, &d).is_some_and(|t| t > 1e-9))
                .count();
            crossings % 2 == 1
        })
    })
}

fn admissible(scene: &Scene, p: &Point, c: &SamplingConstraints) -> bool {
    scene.clearance(p) >= c.min_clearance && inside_scene(scene, p)
}

/// Draws `n_tx` transmitters and `n_rx_per_tx` receivers for each, inside
/// the scene and honouring `constraints`. Identical seeds give identical
/// lists; ids follow [`sample_id`].
pub fn sample_positions(
    scene: &Scene,
    n_tx: usize,
    n_rx_per_tx: usize,
    seed: u64,
    constraints: &SamplingConstraints,
) -> Result<Vec<SampleSpec>> {
    let b = scene.bounds();
    if b.is_empty() {
        return Err(Error::contract(format!("scene {} has no geometry to sample in", scene.name)));
    }
    let z_lo = b.min.z + constraints.height_range[0];
    let z_hi = (b.min.z + constraints.height_range[1]).min(b.max.z);
    let requested = n_tx * (1 + n_rx_per_tx);
    let mut placed = 0;
    if !(z_lo < z_hi) {
        return Err(Error::Starvation { achieved: 0, requested });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[&scene.name]));
    let draw = |rng: &mut ChaCha8Rng, accept: &dyn Fn(&Point) -> bool, placed: usize| -> Result<Point> {
        for _ in 0..MAX_ATTEMPTS {
            let p = Point::new(
                rng.gen_range(b.min.x..b.max.x),
                rng.gen_range(b.min.y..b.max.y),
                rng.gen_range(z_lo..z_hi),
            );
            if accept(&p) {
                return Ok(p);
            }
        }
        Err(Error::Starvation { achieved: placed, requested })
    };

    let mut specs = Vec::with_capacity(n_tx * n_rx_per_tx);
    for t in 0..n_tx {
        let tx = draw(&mut rng, &|p| admissible(scene, p, constraints), placed)?;
        placed += 1;
        for r in 0..n_rx_per_tx {
            let rx = draw(
                &mut rng,
                &|p| (p - tx).norm() >= constraints.min_tx_rx_distance && admissible(scene, p, constraints),
                placed,
            )?;
            placed += 1;
            let id = sample_id(&scene.name, t, r);
            specs.push(SampleSpec {
                seed: derive_seed(seed, &[&id]),
                sample_id: id,
                scene_name: scene.name.clone(),
                tx_index: t,
                rx_index: r,
                tx: [tx.x, tx.y, tx.z],
                rx: [rx.x, rx.y, rx.z],
            });
        }
    }
    Ok(specs)
}

/// Keeps paths with at most `max_interactions` reflections whose gain is
/// within `gain_floor_db` of the strongest such path, and recomputes the
/// aggregate gain.
pub fn filter_paths(csi: &SpatialCsi, max_interactions: usize, gain_floor_db: f64) -> Result<SpatialCsi> {
    let eligible = csi.paths.iter().filter(|p| p.order() <= max_interactions).cloned().collect();
    let kept = apply_gain_floor(eligible, gain_floor_db);
    SpatialCsi::from_paths(csi.tx, csi.rx, csi.frequency, kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn positions_are_deterministic_and_admissible() {
        let scene = bundled::lshape();
        let c = SamplingConstraints::default();
        let a = sample_positions(&scene, 3, 100, 42, &c).unwrap();
        let b = sample_positions(&scene, 3, 100, 42, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 300);
        for s in &a {
            let (tx, rx) = (s.tx_point(), s.rx_point());
            assert!((tx - rx).norm() >= 0.5);
            for p in [tx, rx] {
                assert!(scene.clearance(&p) >= 0.1);
                assert!(!(p.x > 3.0 && p.y > 3.0), "{p:?} lies in the notch");
                assert!((0.5..=2.5).contains(&p.z));
            }
        }
        let other = sample_positions(&scene, 3, 100, 43, &c).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn impossible_clearance_starves() {
        let c = SamplingConstraints {
            min_clearance: 10.0,
            ..Default::default()
        };
        let err = sample_positions(&bundled::shoebox(), 1, 1, 1, &c).unwrap_err();
        assert!(matches!(err, Error::Starvation { achieved: 0, requested: 2 }), "{err}");
    }

    #[test]
    fn furniture_interiors_are_outside() {
        let office = bundled::office();
        assert!(inside_scene(&office, &Point::new(2.0, 2.0, 1.5)));
        assert!(!inside_scene(&office, &Point::new(7.0, 5.2, 1.0)), "inside the cabinet");
        assert!(inside_scene(&office, &Point::new(1.8, 4.0, 0.4)), "under the table");
        let lshape = bundled::lshape();
        assert!(!inside_scene(&lshape, &Point::new(4.5, 4.5, 1.0)));
        assert!(!inside_scene(&lshape, &Point::new(1.4, 1.4, 1.0)), "inside the column");
        assert!(!inside_scene(&lshape, &Point::new(-1.0, 1.0, 1.0)));
    }
}
