//! Spatial-CSI serialization (JSON per pair, CSV one path per row).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SpatialCsi;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainJson {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for GainJson {
    fn from(c: Complex64) -> Self {
        GainJson { re: c.re, im: c.im }
    }
}

impl From<GainJson> for Complex64 {
    fn from(g: GainJson) -> Self {
        Complex64::new(g.re, g.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsiPathEntry {
    pub vertices: Vec<[f64; 3]>,
    pub facet_seq: Vec<usize>,
    pub length_m: f64,
    pub delay_s: f64,
    pub gain_db_perp: f64,
    pub gain_db_par: f64,
    pub phase_rad: f64,
    pub gain_perp: GainJson,
    pub gain_par: GainJson,
}

impl CsiPathEntry {
    pub fn order(&self) -> usize {
        self.facet_seq.len()
    }
}

/// On-disk form of a [`SpatialCsi`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsiFile {
    pub tx: [f64; 3],
    pub rx: [f64; 3],
    pub frequency_hz: f64,
    pub paths: Vec<CsiPathEntry>,
    /// Perpendicular-component aggregate.
    pub aggregate_gain: GainJson,
    pub aggregate_gain_par: GainJson,
}

impl CsiFile {
    pub fn from_csi(csi: &SpatialCsi) -> Result<Self> {
        let paths = csi
            .paths
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let ch = p
                    .channel
                    .ok_or_else(|| Error::contract(format!("path {i} is not characterized")))?;
                Ok(CsiPathEntry {
                    vertices: p.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
                    facet_seq: p.facet_sequence(),
                    length_m: p.length,
                    delay_s: p.delay,
                    gain_db_perp: ch.gain_db_perp(),
                    gain_db_par: ch.gain_db_par(),
                    phase_rad: ch.phase,
                    gain_perp: ch.gain.perp.into(),
                    gain_par: ch.gain.par.into(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CsiFile {
            tx: [csi.tx.x, csi.tx.y, csi.tx.z],
            rx: [csi.rx.x, csi.rx.y, csi.rx.z],
            frequency_hz: csi.frequency,
            paths,
            aggregate_gain: csi.aggregate_gain.perp.into(),
            aggregate_gain_par: csi.aggregate_gain.par.into(),
        })
    }
}

pub fn csi_to_json(csi: &SpatialCsi) -> Result<String> {
    let file = CsiFile::from_csi(csi)?;
    serde_json::to_string_pretty(&file).map_err(|e| Error::parse("csi json", e))
}

pub fn csi_from_json(text: &str) -> Result<CsiFile> {
    serde_json::from_str(text).map_err(|e| Error::parse("csi json", e))
}

pub const CSV_HEADER: &str = "path,order,facet_seq,length_m,delay_s,gain_db_perp,gain_db_par,phase_rad,vertices";

/// One path per row. `facet_seq` is `;`-separated, vertices are `x y z` triples separated by `;`.
pub fn csi_to_csv(csi: &SpatialCsi) -> Result<String> {
    let file = CsiFile::from_csi(csi)?;
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (i, p) in file.paths.iter().enumerate() {
        let seq: Vec<String> = p.facet_seq.iter().map(|f| f.to_string()).collect();
        let verts: Vec<String> = p.vertices.iter().map(|v| format!("{} {} {}", v[0], v[1], v[2])).collect();
        out.push_str(&format!(
            "{i},{},{},{},{},{},{},{},{}\n",
            p.order(),
            seq.join(";"),
            p.length_m,
            p.delay_s,
            p.gain_db_perp,
            p.gain_db_par,
            p.phase_rad,
            verts.join(";")
        ));
    }
    Ok(out)
}
