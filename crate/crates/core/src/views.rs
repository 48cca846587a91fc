//! Orthographic view encoding.
//!
//! Scene views look along each signed axis with +z (or +y for the vertical
//! views) up; facets whose normal points away from the camera are culled, so
//! the room shell opens toward the viewer. Path views are the three
//! axis-aligned planes xy, xz and yz with the first named axis to the right.

use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Scene, RX_COLOR, TX_COLOR};
use crate::tracer::PathRecord;

pub const DEFAULT_IMAGE_SIZE: u32 = 1024;
/// Margin kept free on each side when deriving the default scale.
pub const DEFAULT_MARGIN_PX: u32 = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewConfig {
    pub image_size: u32,
    pub meters_per_pixel: f64,
    pub center: [f64; 3],
    pub marker_radius_px: u32,
    pub line_value: u8,
}

impl ViewConfig {
    /// Scene-specific scale: largest bound extent over `image_size − 2·margin`.
    pub fn for_scene(scene: &Scene, image_size: u32) -> Self {
        let b = scene.bounds();
        let (extent, center) = if b.is_empty() {
            (1.0, Point::origin())
        } else {
            (b.extent().max().max(1e-3), b.center())
        };
        let usable = image_size.saturating_sub(2 * DEFAULT_MARGIN_PX).max(1);
        ViewConfig {
            image_size,
            meters_per_pixel: extent / usable as f64,
            center: [center.x, center.y, center.z],
            marker_radius_px: (image_size / 128).max(2),
            line_value: 255,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size < 8 {
            return Err(Error::contract(format!("image_size {} is below 8 px", self.image_size)));
        }
        if !(self.meters_per_pixel > 0.0) || !self.meters_per_pixel.is_finite() {
            return Err(Error::contract("meters_per_pixel must be positive"));
        }
        Ok(())
    }

    fn center(&self) -> Point {
        Point::new(self.center[0], self.center[1], self.center[2])
    }

    /// Continuous pixel coordinates (column, row) of `p` in `view`; pixel
    /// `(i, j)` covers `[i, i+1) × [j, j+1)`.
    pub fn to_pixel(&self, axes: ViewAxes, p: &Point) -> [f64; 2] {
        let d = p - self.center();
        let half = self.image_size as f64 / 2.0;
        [
            half + axes.u.pick(&d) / self.meters_per_pixel,
            half - axes.v.pick(&d) / self.meters_per_pixel,
        ]
    }

    /// World coordinates along (u, v) of a continuous pixel position.
    pub fn from_pixel(&self, axes: ViewAxes, px: [f64; 2]) -> [f64; 2] {
        let c = self.center();
        let half = self.image_size as f64 / 2.0;
        [
            axes.u.world(&c, (px[0] - half) * self.meters_per_pixel),
            axes.v.world(&c, (half - px[1]) * self.meters_per_pixel),
        ]
    }

    /// Smallest scale at which all `points` land inside the image.
    pub fn required_meters_per_pixel<'a>(&self, points: impl IntoIterator<Item = &'a Point>) -> f64 {
        let c = self.center();
        let half = self.image_size as f64 / 2.0;
        points
            .into_iter()
            .map(|p| (p - c).abs().max() / half)
            .fold(0.0, f64::max)
    }
}

/// Signed coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub index: usize,
    pub sign: f64,
}

impl Axis {
    const fn new(index: usize, sign: f64) -> Self {
        Axis { index, sign }
    }

    fn pick(&self, v: &crate::geometry::Vector) -> f64 {
        self.sign * v[self.index]
    }

    fn world(&self, center: &Point, offset: f64) -> f64 {
        center[self.index] + self.sign * offset
    }
}

/// Image right (`u`), image up (`v`) and toward-camera (`w`) axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewAxes {
    pub u: Axis,
    pub v: Axis,
    pub w: Axis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SceneView {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl SceneView {
    pub const ALL: [SceneView; 6] = [
        SceneView::PosX,
        SceneView::NegX,
        SceneView::PosY,
        SceneView::NegY,
        SceneView::PosZ,
        SceneView::NegZ,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SceneView::PosX => "+x",
            SceneView::NegX => "-x",
            SceneView::PosY => "+y",
            SceneView::NegY => "-y",
            SceneView::PosZ => "+z",
            SceneView::NegZ => "-z",
        }
    }

    /// Filename-safe tag.
    pub fn tag(self) -> &'static str {
        match self {
            SceneView::PosX => "px",
            SceneView::NegX => "nx",
            SceneView::PosY => "py",
            SceneView::NegY => "ny",
            SceneView::PosZ => "pz",
            SceneView::NegZ => "nz",
        }
    }

    pub fn axes(self) -> ViewAxes {
        let (x, y, z) = (0, 1, 2);
        let a = Axis::new;
        match self {
            SceneView::PosX => ViewAxes { u: a(y, 1.0), v: a(z, 1.0), w: a(x, 1.0) },
            SceneView::NegX => ViewAxes { u: a(y, -1.0), v: a(z, 1.0), w: a(x, -1.0) },
            SceneView::PosY => ViewAxes { u: a(x, -1.0), v: a(z, 1.0), w: a(y, 1.0) },
            SceneView::NegY => ViewAxes { u: a(x, 1.0), v: a(z, 1.0), w: a(y, -1.0) },
            SceneView::PosZ => ViewAxes { u: a(x, 1.0), v: a(y, 1.0), w: a(z, 1.0) },
            SceneView::NegZ => ViewAxes { u: a(x, -1.0), v: a(y, 1.0), w: a(z, -1.0) },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathView {
    Xy,
    Xz,
    Yz,
}

impl PathView {
    pub const ALL: [PathView; 3] = [PathView::Xy, PathView::Xz, PathView::Yz];

    pub fn tag(self) -> &'static str {
        match self {
            PathView::Xy => "xy",
            PathView::Xz => "xz",
            PathView::Yz => "yz",
        }
    }

    /// World axis indices shown as (columns, rows).
    pub fn plane(self) -> (usize, usize) {
        match self {
            PathView::Xy => (0, 1),
            PathView::Xz => (0, 2),
            PathView::Yz => (1, 2),
        }
    }

    pub fn axes(self) -> ViewAxes {
        let (u, v) = self.plane();
        let w = 3 - u - v;
        ViewAxes {
            u: Axis::new(u, 1.0),
            v: Axis::new(v, 1.0),
            w: Axis::new(w, 1.0),
        }
    }
}

/// Six RGB scene encodings in [`SceneView::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneViewSet {
    pub config: ViewConfig,
    pub images: Vec<RgbImage>,
}

/// Three grayscale path encodings in [`PathView::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct PathViewSet {
    pub config: ViewConfig,
    pub images: Vec<GrayImage>,
}

impl SceneViewSet {
    pub fn image(&self, view: SceneView) -> &RgbImage {
        &self.images[SceneView::ALL.iter().position(|v| *v == view).expect("view in ALL")]
    }

    /// Writes `{sample_id}_{tag}.png` per view; returns the written paths.
    pub fn save(&self, dir: &Path, sample_id: &str) -> Result<Vec<PathBuf>> {
        SceneView::ALL
            .iter()
            .zip(&self.images)
            .map(|(v, img)| {
                let path = dir.join(format!("{sample_id}_{}.png", v.tag()));
                write_png_atomic(&path, img)?;
                Ok(path)
            })
            .collect()
    }
}

impl PathViewSet {
    pub fn image(&self, view: PathView) -> &GrayImage {
        &self.images[view as usize]
    }

    pub fn save(&self, dir: &Path, sample_id: &str) -> Result<Vec<PathBuf>> {
        PathView::ALL
            .iter()
            .zip(&self.images)
            .map(|(v, img)| {
                let path = dir.join(format!("{sample_id}_{}.png", v.tag()));
                write_png_atomic(&path, img)?;
                Ok(path)
            })
            .collect()
    }

    /// Reads `{sample_id}_{xy,xz,yz}.png` from `dir`.
    pub fn load(dir: &Path, sample_id: &str, config: ViewConfig) -> Result<Self> {
        let images = PathView::ALL
            .iter()
            .map(|v| {
                let path = dir.join(format!("{sample_id}_{}.png", v.tag()));
                let img = image::open(&path).map_err(|e| Error::parse(path.display().to_string(), e))?;
                Ok(img.to_luma8())
            })
            .collect::<Result<Vec<_>>>()?;
        if images.iter().any(|i| i.width() != config.image_size || i.height() != config.image_size) {
            return Err(Error::contract(format!(
                "path images of {sample_id} are not {0}×{0}",
                config.image_size
            )));
        }
        Ok(PathViewSet { config, images })
    }
}

/// Encodes to PNG in memory, writes a sibling temp file, then renames.
pub fn write_png_atomic<P, C>(path: &Path, img: &image::ImageBuffer<P, C>) -> Result<()>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    let mut bytes = std::io::Cursor::new(Vec::new());
    img.write_to(&mut bytes, image::ImageFormat::Png)?;
    write_atomic(path, bytes.get_ref())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Six-view scene encoding with Tx/Rx marker discs.
pub fn render_scene_views(scene: &Scene, tx: &Point, rx: &Point, config: &ViewConfig) -> Result<SceneViewSet> {
    config.validate()?;
    let corners = scene_corners(scene);
    let required = config.required_meters_per_pixel(corners.iter().chain([tx, rx]));
    if required > config.meters_per_pixel {
        return Err(Error::Extent {
            required_meters_per_pixel: required,
        });
    }
    let images = SceneView::ALL
        .iter()
        .map(|&v| render_one_scene_view(scene, tx, rx, config, v))
        .collect();
    Ok(SceneViewSet {
        config: config.clone(),
        images,
    })
}

fn scene_corners(scene: &Scene) -> Vec<Point> {
    let b = scene.bounds();
    if b.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(8);
    for i in 0..8 {
        out.push(Point::new(
            if i & 1 == 0 { b.min.x } else { b.max.x },
            if i & 2 == 0 { b.min.y } else { b.max.y },
            if i & 4 == 0 { b.min.z } else { b.max.z },
        ));
    }
    out
}

fn render_one_scene_view(scene: &Scene, tx: &Point, rx: &Point, config: &ViewConfig, view: SceneView) -> RgbImage {
    let size = config.image_size;
    let axes = view.axes();
    let mut img = RgbImage::new(size, size);

    let mut order: Vec<(f64, usize)> = scene
        .facets()
        .iter()
        .enumerate()
        .filter(|(_, f)| axes.w.pick(&f.normal()) > 1e-12)
        .map(|(i, f)| (axes.w.pick(&f.centroid().coords), i))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));

    for (_, i) in order {
        let f = &scene.facets()[i];
        let color = scene.materials[f.material_id].render_color;
        let tri = f.vertices.map(|v| config.to_pixel(axes, &v));
        fill_triangle(&mut img, tri, Rgb(color));
    }
    let r = config.marker_radius_px as f64;
    fill_disc(&mut img, config.to_pixel(axes, tx), r, Rgb(TX_COLOR));
    fill_disc(&mut img, config.to_pixel(axes, rx), r, Rgb(RX_COLOR));
    img
}

/// Fills pixels whose centers lie inside the triangle (edges inclusive).
fn fill_triangle(img: &mut RgbImage, t: [[f64; 2]; 3], color: Rgb<u8>) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let min_x = t.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min).floor().max(0.0) as i64;
    let max_x = (t.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max).ceil() as i64).min(w - 1);
    let min_y = t.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min).floor().max(0.0) as i64;
    let max_y = (t.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max).ceil() as i64).min(h - 1);
    let edge = |a: [f64; 2], b: [f64; 2], p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let area = edge(t[0], t[1], t[2]);
    if area.abs() < 1e-12 {
        return;
    }
    let eps = 1e-9 * area.abs();
    for y in min_y..=max_y {
        for x in min_x..=max_x {
            let p = [x as f64 + 0.5, y as f64 + 0.5];
            let e0 = edge(t[1], t[2], p) * area.signum();
            let e1 = edge(t[2], t[0], p) * area.signum();
            let e2 = edge(t[0], t[1], p) * area.signum();
            if e0 >= -eps && e1 >= -eps && e2 >= -eps {
                img.put_pixel(x as u32, y as u32, color);
            }
        }
    }
}

fn fill_disc(img: &mut RgbImage, c: [f64; 2], r: f64, color: Rgb<u8>) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0 = ((c[0] - r).floor() as i64).max(0);
    let x1 = ((c[0] + r).ceil() as i64).min(w - 1);
    let y0 = ((c[1] - r).floor() as i64).max(0);
    let y1 = ((c[1] + r).ceil() as i64).min(h - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 + 0.5 - c[0];
            let dy = y as f64 + 0.5 - c[1];
            if dx * dx + dy * dy <= r * r {
                img.put_pixel(x as u32, y as u32, color);
            }
        }
    }
}

/// Visits pixels near segment `a`→`b` with intensity `max(0, 1 − d)`, where
/// `d` is the pixel-center distance to the segment in pixels.
pub fn for_each_segment_pixel(width: u32, height: u32, a: [f64; 2], b: [f64; 2], mut visit: impl FnMut(u32, u32, f64)) {
    let x0 = ((a[0].min(b[0]) - 1.0).floor() as i64).max(0);
    let x1 = ((a[0].max(b[0]) + 1.0).ceil() as i64).min(width as i64 - 1);
    let y0 = ((a[1].min(b[1]) - 1.0).floor() as i64).max(0);
    let y1 = ((a[1].max(b[1]) + 1.0).ceil() as i64).min(height as i64 - 1);
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    for y in y0..=y1 {
        for x in x0..=x1 {
            let p = [x as f64 + 0.5, y as f64 + 0.5];
            let t = if len2 > 0.0 {
                (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q = [a[0] + d[0] * t - p[0], a[1] + d[1] * t - p[1]];
            let intensity = 1.0 - (q[0] * q[0] + q[1] * q[1]).sqrt();
            if intensity > 0.0 {
                visit(x as u32, y as u32, intensity);
            }
        }
    }
}

/// Draws an anti-aliased segment, keeping the brighter value per pixel.
pub fn draw_segment(img: &mut GrayImage, a: [f64; 2], b: [f64; 2], value: u8) {
    let (w, h) = img.dimensions();
    for_each_segment_pixel(w, h, a, b, |x, y, intensity| {
        let v = (value as f64 * intensity).round() as u8;
        let px = img.get_pixel_mut(x, y);
        px.0[0] = px.0[0].max(v);
    });
}

/// Three-view grayscale path encoding on black.
pub fn rasterize_path_views(paths: &[PathRecord], config: &ViewConfig) -> Result<PathViewSet> {
    config.validate()?;
    let size = config.image_size as f64;
    for (i, p) in paths.iter().enumerate() {
        for view in PathView::ALL {
            for v in &p.vertices {
                let [c, r] = config.to_pixel(view.axes(), v);
                if !(0.0..=size).contains(&c) || !(0.0..=size).contains(&r) {
                    return Err(Error::PathExtent { path_index: i });
                }
            }
        }
    }
    let images = PathView::ALL
        .iter()
        .map(|&view| {
            let mut img = GrayImage::from_pixel(config.image_size, config.image_size, Luma([0]));
            for p in paths {
                for w in p.vertices.windows(2) {
                    let a = config.to_pixel(view.axes(), &w[0]);
                    let b = config.to_pixel(view.axes(), &w[1]);
                    draw_segment(&mut img, a, b, config.line_value);
                }
            }
            img
        })
        .collect();
    Ok(PathViewSet {
        config: config.clone(),
        images,
    })
}
