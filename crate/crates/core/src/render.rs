//! Rasterizes a layout onto the white canvas, crops surrounding whitespace,
//! and resamples to the fixed 325×260 RGB model input.

use std::io::Cursor;

use image::{ImageFormat, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::graph::Graph;
use crate::layout::{CANVAS_HEIGHT, CANVAS_WIDTH};

pub const MODEL_WIDTH: u32 = 325;
pub const MODEL_HEIGHT: u32 = 260;
/// A pixel counts as ink when any channel is below this level.
pub const INK_THRESHOLD: u8 = 250;

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const EDGE_COLOR: [u8; 3] = [85, 85, 85];
const UNIFORM_NODE: [u8; 3] = [31, 119, 180];
const PALETTE: [[u8; 3]; 12] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
    [0, 0, 128],
    [128, 128, 0],
];

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("canvas has no ink to crop to")]
    BlankCanvas,
    #[error("{positions} positions for {nodes} nodes")]
    PositionCount { positions: usize, nodes: usize },
    #[error("invalid render style: {0}")]
    InvalidStyle(String),
    #[error("PNG encoding failed: {0}")]
    Encode(#[source] image::ImageError),
    #[error("PNG decoding failed: {0}")]
    Decode(#[source] image::ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeColoring {
    #[default]
    ByCommunity,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderStyle {
    pub canvas_width: u32,
    pub canvas_height: u32,
    pub node_radius: f64,
    pub link_width: f64,
    pub node_coloring: NodeColoring,
    pub margin_after_crop: u32,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle {
            canvas_width: CANVAS_WIDTH as u32,
            canvas_height: CANVAS_HEIGHT as u32,
            node_radius: 8.0,
            link_width: 0.5,
            node_coloring: NodeColoring::ByCommunity,
            margin_after_crop: 5,
        }
    }
}

fn blend(img: &mut RgbImage, x: i64, y: i64, color: [u8; 3], coverage: f64) {
    if coverage <= 0.0 || x < 0 || y < 0 || x >= img.width() as i64 || y >= img.height() as i64 {
        return;
    }
    let a = coverage.min(1.0);
    let px = img.get_pixel_mut(x as u32, y as u32);
    for (c, &target) in px.0.iter_mut().zip(color.iter()) {
        let v = *c as f64 * (1.0 - a) + target as f64 * a;
        *c = v.round().clamp(0.0, 255.0) as u8;
    }
}

/// Fraction of a unit pixel column covered by a band of `width` whose center
/// line is `d` away from the pixel center.
fn band_coverage(d: f64, width: f64) -> f64 {
    let lo = (d - width / 2.0).max(-0.5);
    let hi = (d + width / 2.0).min(0.5);
    (hi - lo).max(0.0)
}

fn draw_segment(img: &mut RgbImage, a: Point, b: Point, width: f64, color: [u8; 3]) {
    let reach = width / 2.0 + 1.0;
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let steep = dy.abs() > dx.abs();
    // Walk pixel lines across the major axis; on each, only the span the
    // segment can reach is visited.
    let (ma, mi_a) = major_minor(steep, a);
    let (mb, mi_b) = major_minor(steep, b);
    let (major_len, minor_len) = if steep { (img.height(), img.width()) } else { (img.width(), img.height()) };
    let lo = (ma.min(mb) - reach).floor().max(0.0) as i64;
    let hi = ((ma.max(mb) + reach).ceil() as i64).min(major_len as i64 - 1);
    for m in lo..=hi {
        let mc = m as f64 + 0.5;
        let (t0, t1) = if mb != ma {
            let ta = (mc - reach - ma) / (mb - ma);
            let tb = (mc + reach - ma) / (mb - ma);
            (ta.min(tb).clamp(0.0, 1.0), ta.max(tb).clamp(0.0, 1.0))
        } else {
            (0.0, 1.0)
        };
        let m0 = mi_a + t0 * (mi_b - mi_a);
        let m1 = mi_a + t1 * (mi_b - mi_a);
        let n0 = (m0.min(m1) - reach).floor().max(0.0) as i64;
        let n1 = ((m0.max(m1) + reach).ceil() as i64).min(minor_len as i64 - 1);
        for n in n0..=n1 {
            let (x, y) = if steep { (n, m) } else { (m, n) };
            let c = Point::new(x as f64 + 0.5, y as f64 + 0.5);
            let t = if len2 > 0.0 {
                (((c.x - a.x) * dx + (c.y - a.y) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let d = c.dist(Point::new(a.x + t * dx, a.y + t * dy));
            blend(img, x, y, color, band_coverage(d, width));
        }
    }
}

fn major_minor(steep: bool, p: Point) -> (f64, f64) {
    if steep {
        (p.y, p.x)
    } else {
        (p.x, p.y)
    }
}

fn draw_disc(img: &mut RgbImage, center: Point, radius: f64, color: [u8; 3]) {
    let x0 = (center.x - radius - 1.0).floor() as i64;
    let x1 = (center.x + radius + 1.0).ceil() as i64;
    let y0 = (center.y - radius - 1.0).floor() as i64;
    let y1 = (center.y + radius + 1.0).ceil() as i64;
    for y in y0.max(0)..=y1.min(img.height() as i64 - 1) {
        for x in x0.max(0)..=x1.min(img.width() as i64 - 1) {
            let d = center.dist(Point::new(x as f64 + 0.5, y as f64 + 0.5));
            blend(img, x, y, color, (radius + 0.5 - d).clamp(0.0, 1.0));
        }
    }
}

/// Draws edges, then node discs on top, onto a white canvas.
pub fn rasterize(
    graph: &Graph,
    positions: &[Point],
    style: &RenderStyle,
) -> Result<RgbImage, RenderError> {
    if graph.node_count() == 0 {
        return Err(RenderError::EmptyGraph);
    }
    if positions.len() != graph.node_count() {
        return Err(RenderError::PositionCount { positions: positions.len(), nodes: graph.node_count() });
    }
    if !(style.node_radius > 0.0) || style.canvas_width == 0 || style.canvas_height == 0 {
        return Err(RenderError::InvalidStyle("radius and canvas must be positive".into()));
    }
    let mut img = RgbImage::from_pixel(style.canvas_width, style.canvas_height, WHITE);
    for &(u, v) in graph.edges() {
        draw_segment(&mut img, positions[u], positions[v], style.link_width, EDGE_COLOR);
    }
    let labels = graph.communities();
    for (v, &p) in positions.iter().enumerate() {
        let color = match (style.node_coloring, labels) {
            (NodeColoring::ByCommunity, Some(l)) => PALETTE[l[v] as usize % PALETTE.len()],
            _ => UNIFORM_NODE,
        };
        draw_disc(&mut img, p, style.node_radius, color);
    }
    Ok(img)
}

fn is_ink(px: &Rgb<u8>) -> bool {
    px.0.iter().any(|&c| c < INK_THRESHOLD)
}

/// Tight bounding box `(x0, y0, x1, y1)`, inclusive, of the ink pixels.
pub fn ink_bounds(img: &RgbImage) -> Option<(u32, u32, u32, u32)> {
    let mut bounds: Option<(u32, u32, u32, u32)> = None;
    for (x, y, px) in img.enumerate_pixels() {
        if is_ink(px) {
            bounds = Some(match bounds {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
    }
    bounds
}

/// Crops to the ink bounding box grown by `margin`, clamped to the canvas.
pub fn crop_whitespace(img: &RgbImage, margin: u32) -> Result<RgbImage, RenderError> {
    let (x0, y0, x1, y1) = ink_bounds(img).ok_or(RenderError::BlankCanvas)?;
    let x0 = x0.saturating_sub(margin);
    let y0 = y0.saturating_sub(margin);
    let x1 = (x1 + margin).min(img.width() - 1);
    let y1 = (y1 + margin).min(img.height() - 1);
    Ok(image::imageops::crop_imm(img, x0, y0, x1 - x0 + 1, y1 - y0 + 1).to_image())
}

/// Bilinear resample with pixel-center alignment.
pub fn resize_bilinear(img: &RgbImage, width: u32, height: u32) -> RgbImage {
    let (sw, sh) = (img.width(), img.height());
    let sx = sw as f64 / width as f64;
    let sy = sh as f64 / height as f64;
    let sample = |pos: f64, limit: u32| {
        let p = pos.clamp(0.0, (limit - 1) as f64);
        let i0 = p.floor() as u32;
        let i1 = (i0 + 1).min(limit - 1);
        (i0, i1, p - i0 as f64)
    };
    RgbImage::from_fn(width, height, |x, y| {
        let (x0, x1, fx) = sample((x as f64 + 0.5) * sx - 0.5, sw);
        let (y0, y1, fy) = sample((y as f64 + 0.5) * sy - 0.5, sh);
        let (a, b) = (img.get_pixel(x0, y0).0, img.get_pixel(x1, y0).0);
        let (c, d) = (img.get_pixel(x0, y1).0, img.get_pixel(x1, y1).0);
        let mut out = [0u8; 3];
        for k in 0..3 {
            let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
            let bottom = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
            out[k] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
        }
        Rgb(out)
    })
}

pub fn resize_to_model(img: &RgbImage) -> RgbImage {
    resize_bilinear(img, MODEL_WIDTH, MODEL_HEIGHT)
}

/// Full image pipeline: rasterize, crop, resize.
pub fn render_layout(
    graph: &Graph,
    positions: &[Point],
    style: &RenderStyle,
) -> Result<RgbImage, RenderError> {
    let canvas = rasterize(graph, positions, style)?;
    let cropped = crop_whitespace(&canvas, style.margin_after_crop)?;
    Ok(resize_to_model(&cropped))
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>, RenderError> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).map_err(RenderError::Encode)?;
    Ok(out.into_inner())
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbImage, RenderError> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map(|img| img.to_rgb8())
        .map_err(RenderError::Decode)
}
