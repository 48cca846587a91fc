//! Scenes shipped with the crate.

use crate::error::Result;
use crate::geometry::{load_scene, parse_scene, Scene};

pub const SHOEBOX_JSON: &str = include_str!("../scenes/shoebox.json");
pub const OFFICE_JSON: &str = include_str!("../scenes/office.json");
pub const LSHAPE_JSON: &str = include_str!("../scenes/lshape.json");

pub const NAMES: [&str; 3] = ["shoebox", "office", "lshape"];

/// 5 × 4 × 3 m empty room, 12 facets.
pub fn shoebox() -> Scene {
    parse_scene(SHOEBOX_JSON).expect("bundled shoebox parses")
}

/// 8 × 6 × 3 m room with a partition, a table slab and a metal cabinet.
pub fn office() -> Scene {
    parse_scene(OFFICE_JSON).expect("bundled office parses")
}

/// L-shaped room with a glass wall and a column.
pub fn lshape() -> Scene {
    parse_scene(LSHAPE_JSON).expect("bundled lshape parses")
}

pub fn by_name(name: &str) -> Option<Scene> {
    match name {
        "shoebox" => Some(shoebox()),
        "office" => Some(office()),
        "lshape" => Some(lshape()),
        _ => None,
    }
}

pub fn all() -> Vec<Scene> {
    vec![shoebox(), office(), lshape()]
}

/// Loads `spec` as a bundled scene name, else as a file path.
pub fn resolve(spec: &str) -> Result<Scene> {
    match by_name(spec) {
        Some(s) => Ok(s),
        None => load_scene(spec),
    }
}
