//! Scene file reading and writing (`raydio-scene/1` JSON).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{split_quad, Facet, Material, Point, Scene};
use crate::error::{Error, Result};

pub const SCENE_FORMAT: &str = "raydio-scene/1";

#[derive(Debug, Serialize, Deserialize)]
struct SceneFile {
    format: String,
    name: String,
    materials: Vec<MaterialEntry>,
    facets: Vec<FacetEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    notes: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MaterialEntry {
    name: String,
    eps_r: f64,
    sigma: f64,
    color: [u8; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct FacetEntry {
    v: Vec<[f64; 3]>,
    mat: usize,
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
        other => other,
    })
}

/// Parses scene JSON. Authored quads (4 vertices) expand in place into two
/// triangles, so facet indices in errors refer to entries in the file.
pub fn parse_scene(text: &str) -> Result<Scene> {
    let file: SceneFile = serde_json::from_str(text).map_err(|e| Error::parse("scene", e))?;
    if file.format != SCENE_FORMAT {
        return Err(Error::parse(
            "scene",
            format!("unsupported format {:?}, expected {SCENE_FORMAT:?}", file.format),
        ));
    }
    let materials: Vec<Material> = file
        .materials
        .into_iter()
        .map(|m| Material::new(m.name, m.eps_r, m.sigma, m.color))
        .collect();

    let mut facets = Vec::with_capacity(file.facets.len());
    for (i, entry) in file.facets.iter().enumerate() {
        if entry.mat >= materials.len() {
            return Err(Error::Validation {
                element: "facet",
                index: i,
                reason: format!(
                    "material_id {} does not resolve ({} materials)",
                    entry.mat,
                    materials.len()
                ),
            });
        }
        let pts: Vec<Point> = entry.v.iter().map(|c| Point::new(c[0], c[1], c[2])).collect();
        match pts.len() {
            3 => facets.push(Facet::new([pts[0], pts[1], pts[2]], entry.mat)),
            4 => {
                let tris = split_quad([pts[0], pts[1], pts[2], pts[3]], entry.mat);
                for (k, t) in tris.iter().enumerate() {
                    if t.area() <= super::MIN_FACET_AREA {
                        return Err(Error::Validation {
                            element: "facet",
                            index: i,
                            reason: format!("quad half {k} is degenerate"),
                        });
                    }
                }
                facets.extend(tris);
            }
            n => {
                return Err(Error::Validation {
                    element: "facet",
                    index: i,
                    reason: format!("expected 3 or 4 vertices, found {n}"),
                })
            }
        }
    }
    Scene::new(file.name, materials, facets)
}

/// Serializes a scene as triangle-only `raydio-scene/1` JSON.
pub fn scene_to_json(scene: &Scene) -> String {
    let file = SceneFile {
        format: SCENE_FORMAT.to_string(),
        name: scene.name.clone(),
        materials: scene
            .materials
            .iter()
            .map(|m| MaterialEntry {
                name: m.name.clone(),
                eps_r: m.relative_permittivity,
                sigma: m.conductivity,
                color: m.render_color,
            })
            .collect(),
        facets: scene
            .facets()
            .iter()
            .map(|f| FacetEntry {
                v: f.vertices.iter().map(|p| [p.x, p.y, p.z]).collect(),
                mat: f.material_id,
            })
            .collect(),
        notes: None,
    };
    serde_json::to_string_pretty(&file).expect("scene serializes")
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scene_to_json(scene)).map_err(|e| Error::io(path, e))
}
