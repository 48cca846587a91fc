//! Path finding between a transmitter and a receiver.
//!
//! [`image_method_paths`] is the exact engine: it enumerates facet sequences,
//! mirrors the transmitter across each facet plane and validates the unfolded
//! chain. [`sbr_trace`] launches a Fibonacci-sphere ray bundle and is used as
//! an independent cross-check.

mod export;
mod image;
mod sbr;

pub use export::{csi_from_json, csi_to_csv, csi_to_json, CsiFile, CsiPathEntry, GainJson, CSV_HEADER};
pub use image::image_method_paths;
pub use sbr::{compare_with_sbr, fibonacci_directions, sbr_trace, OracleAgreement};

use serde::{Deserialize, Serialize};

use crate::channel::{self, ComplexGain, PathChannel, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::geometry::{Point, Scene, SpatialIndex, Vector, DEFAULT_T_MIN};

/// Minimum Tx/Rx separation and minimum clearance from any facet.
const MIN_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    Reflection,
}

/// One specular bounce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub kind: InteractionKind,
    pub facet_id: usize,
    pub point: Point,
    /// Angle from the facet normal, radians in [0, π/2).
    pub incidence_angle: f64,
}

/// A single propagation path, Tx first and Rx last.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub vertices: Vec<Point>,
    pub interactions: Vec<Interaction>,
    pub length: f64,
    pub delay: f64,
    /// Gains and phase; `None` until the path is characterized.
    pub channel: Option<PathChannel>,
}

impl PathRecord {
    /// Geometry-only path through `vertices`; interactions align with the interior vertices.
    pub fn from_vertices(vertices: Vec<Point>, interactions: Vec<Interaction>, speed_of_light: f64) -> Self {
        debug_assert_eq!(vertices.len(), interactions.len() + 2);
        let length = polyline_length(&vertices);
        PathRecord {
            vertices,
            interactions,
            length,
            delay: length / speed_of_light,
            channel: None,
        }
    }

    pub fn order(&self) -> usize {
        self.interactions.len()
    }

    pub fn facet_sequence(&self) -> Vec<usize> {
        self.interactions.iter().map(|i| i.facet_id).collect()
    }

    /// Unit direction of the first segment.
    pub fn departure_direction(&self) -> Vector {
        (self.vertices[1] - self.vertices[0]).normalize()
    }

    /// Unit direction of the last segment, pointing into the receiver.
    pub fn arrival_direction(&self) -> Vector {
        let n = self.vertices.len();
        (self.vertices[n - 1] - self.vertices[n - 2]).normalize()
    }

    /// The same path traversed from Rx to Tx, geometry only. Specular
    /// bounces keep their incidence angles under reversal.
    pub fn reversed(&self) -> PathRecord {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        let mut interactions = self.interactions.clone();
        interactions.reverse();
        PathRecord {
            length: polyline_length(&vertices),
            delay: self.delay,
            vertices,
            interactions,
            channel: None,
        }
    }

    pub fn amplitude(&self) -> Option<f64> {
        self.channel.map(|c| c.gain.perp.norm().max(c.gain.par.norm()))
    }
}

pub fn polyline_length(vertices: &[Point]) -> f64 {
    vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Tracing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceConfig {
    pub frequency: f64,
    /// Maximum number of specular reflections per path.
    pub max_order: usize,
    /// Paths weaker than the strongest by more than this are dropped (dB, <= 0).
    pub gain_floor_db: f64,
    pub speed_of_light: f64,
    pub sbr_ray_count: usize,
    pub sbr_max_bounces: usize,
    /// Multiplier on the reception-sphere radius L·Δα/√3.
    pub sbr_capture_scale: f64,
    /// Refine each captured surface sequence by shooting and drop those
    /// whose refined ray does not reach rx through the same surfaces.
    pub sbr_refine: bool,
    /// Self-intersection guard for ray queries, m.
    pub t_min: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            frequency: 2.4e9,
            max_order: 2,
            gain_floor_db: -25.0,
            speed_of_light: SPEED_OF_LIGHT,
            sbr_ray_count: 200_000,
            sbr_max_bounces: 2,
            sbr_capture_scale: 1.5,
            sbr_refine: true,
            t_min: DEFAULT_T_MIN,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency > 0.0) || !self.frequency.is_finite() {
            return Err(Error::contract(format!("frequency {} must be positive", self.frequency)));
        }
        if self.max_order > 8 {
            return Err(Error::contract(format!("max_order {} exceeds 8", self.max_order)));
        }
        if !(self.gain_floor_db <= 0.0) {
            return Err(Error::contract(format!("gain_floor_db {} must be <= 0", self.gain_floor_db)));
        }
        if !(self.speed_of_light > 0.0) {
            return Err(Error::contract("speed_of_light must be positive"));
        }
        if !(self.sbr_capture_scale > 0.0) {
            return Err(Error::contract("sbr_capture_scale must be positive"));
        }
        if !(self.t_min >= 0.0) {
            return Err(Error::contract("t_min must be non-negative"));
        }
        Ok(())
    }
}

/// All surviving paths for one Tx/Rx pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCsi {
    pub tx: Point,
    pub rx: Point,
    pub frequency: f64,
    pub paths: Vec<PathRecord>,
    pub aggregate_gain: ComplexGain,
}

impl SpatialCsi {
    pub fn from_paths(tx: Point, rx: Point, frequency: f64, paths: Vec<PathRecord>) -> Result<Self> {
        let aggregate_gain = channel::aggregate(&paths)?;
        Ok(SpatialCsi {
            tx,
            rx,
            frequency,
            paths,
            aggregate_gain,
        })
    }
}

fn check_pair(tx: &Point, rx: &Point) -> Result<f64> {
    let d = (rx - tx).norm();
    if !(d > MIN_SEPARATION) {
        return Err(Error::contract(format!("tx and rx coincide (separation {d} m)")));
    }
    Ok(d)
}

/// Direct path, present iff the open segment tx→rx hits no facet.
pub fn find_los(index: &SpatialIndex, tx: &Point, rx: &Point) -> Result<Option<PathRecord>> {
    find_los_with(index, tx, rx, DEFAULT_T_MIN, SPEED_OF_LIGHT)
}

pub(crate) fn find_los_with(
    index: &SpatialIndex,
    tx: &Point,
    rx: &Point,
    t_min: f64,
    speed_of_light: f64,
) -> Result<Option<PathRecord>> {
    let d = check_pair(tx, rx)?;
    let dir = (rx - tx) / d;
    if index.occluded(tx, &dir, t_min, d - t_min, &[]) {
        return Ok(None);
    }
    Ok(Some(PathRecord::from_vertices(vec![*tx, *rx], Vec::new(), speed_of_light)))
}

/// Keeps paths within `gain_floor_db` of the strongest one (by the stronger
/// polarization component). Paths must be characterized.
pub fn apply_gain_floor(paths: Vec<PathRecord>, gain_floor_db: f64) -> Vec<PathRecord> {
    let strongest = paths
        .iter()
        .filter_map(|p| p.channel.map(|c| c.gain_db()))
        .fold(f64::NEG_INFINITY, f64::max);
    if !strongest.is_finite() {
        return paths;
    }
    paths
        .into_iter()
        .filter(|p| p.channel.is_some_and(|c| c.gain_db() >= strongest + gain_floor_db))
        .collect()
}

/// Full pipeline for one pair: exact paths, channel characterization,
/// relative gain floor and coherent aggregation.
pub fn trace_pair(scene: &Scene, index: &SpatialIndex, tx: &Point, rx: &Point, config: &TraceConfig) -> Result<SpatialCsi> {
    config.validate()?;
    check_pair(tx, rx)?;
    for (label, p) in [("tx", tx), ("rx", rx)] {
        let clearance = scene.clearance(p);
        if clearance <= MIN_SEPARATION {
            return Err(Error::contract(format!(
                "{label} at {:?} lies on a facet surface (clearance {clearance:e} m)",
                p.coords.as_slice()
            )));
        }
    }
    let geometric = image_method_paths(scene, index, tx, rx, config)?;
    let characterized = geometric
        .iter()
        .map(|p| channel::characterize_path(p, scene, config))
        .collect::<Result<Vec<_>>>()?;
    let kept = apply_gain_floor(characterized, config.gain_floor_db);
    SpatialCsi::from_paths(*tx, *rx, config.frequency, kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn los_in_empty_scene_is_three_four_five() {
        let idx = Scene::empty("e").build_index();
        let p = find_los(&idx, &Point::origin(), &Point::new(3.0, 4.0, 0.0)).unwrap().unwrap();
        assert_eq!(p.length, 5.0);
        assert!((p.delay - 16.678_204_759_9e-9).abs() < 1e-18);
        assert_eq!(p.vertices.len(), p.interactions.len() + 2);
    }

    #[test]
    fn coincident_endpoints_are_rejected() {
        let idx = Scene::empty("e").build_index();
        assert!(matches!(
            find_los(&idx, &Point::origin(), &Point::new(0.0, 0.0, 1e-7)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn config_bounds() {
        let mut c = TraceConfig::default();
        assert!(c.validate().is_ok());
        c.max_order = 9;
        assert!(c.validate().is_err());
        c.max_order = 2;
        c.gain_floor_db = 3.0;
        assert!(c.validate().is_err());
        c.gain_floor_db = -25.0;
        c.frequency = 0.0;
        assert!(c.validate().is_err());
    }
}
