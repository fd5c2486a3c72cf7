//! Deterministic synthetic stimuli: analytic silhouettes rasterized onto the
//! standard 100x100 canvas.

use std::fmt;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::retina::Retina;

pub const CANVAS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Bar,
    Corner,
    Cup,
    Hand,
    Composite,
}

impl ShapeKind {
    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Bar => "bar",
            ShapeKind::Corner => "corner",
            ShapeKind::Cup => "cup",
            ShapeKind::Hand => "hand",
            ShapeKind::Composite => "composite",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "bar" => Ok(ShapeKind::Bar),
            "corner" => Ok(ShapeKind::Corner),
            "cup" => Ok(ShapeKind::Cup),
            "hand" => Ok(ShapeKind::Hand),
            "composite" => Ok(ShapeKind::Composite),
            other => Err(Error::UnknownShape(other.to_string())),
        }
    }
}

/// Pose parameters for one synthetic stimulus.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub angle_deg: f64,
    pub scale: f64,
    /// Number of scattered elements; only composites read it.
    pub count: u32,
}

impl ShapeSpec {
    pub fn new(kind: ShapeKind) -> Self {
        ShapeSpec {
            kind,
            angle_deg: 0.0,
            scale: 1.0,
            count: 1,
        }
    }

    pub fn with_angle(mut self, angle_deg: f64) -> Self {
        self.angle_deg = angle_deg;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_count(mut self, count: u32) -> Self {
        self.count = count;
        self
    }

    /// Parses the parameter list of a `shape:angle=..,scale=..,count=..` spec.
    pub fn parse(text: &str) -> Result<Self> {
        let mut parts = text.splitn(2, ':');
        let kind = ShapeKind::parse(parts.next().unwrap_or(""))?;
        let mut spec = ShapeSpec::new(kind);
        if let Some(args) = parts.next() {
            for field in args.split(',').filter(|f| !f.is_empty()) {
                let (key, value) = field.split_once('=').ok_or_else(|| {
                    Error::Config(format!("shape parameter {field:?} is not key=value"))
                })?;
                match key {
                    "angle" => {
                        spec.angle_deg = value
                            .parse()
                            .map_err(|_| Error::Config(format!("bad angle {value:?}")))?
                    }
                    "scale" => {
                        spec.scale = value
                            .parse()
                            .map_err(|_| Error::Config(format!("bad scale {value:?}")))?
                    }
                    "count" => {
                        spec.count = value
                            .parse()
                            .map_err(|_| Error::Config(format!("bad count {value:?}")))?
                    }
                    other => {
                        return Err(Error::Config(format!("unknown shape parameter {other:?}")))
                    }
                }
            }
        }
        if !(spec.scale.is_finite() && spec.scale > 0.0) {
            return Err(Error::Config(format!("scale {} must be positive", spec.scale)));
        }
        Ok(spec)
    }
}

impl fmt::Display for ShapeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:angle={},scale={},count={}",
            self.kind.name(),
            self.angle_deg,
            self.scale,
            self.count
        )
    }
}

struct Canvas {
    values: Grid<f64>,
}

impl Canvas {
    fn new() -> Self {
        Canvas {
            values: Grid::filled(CANVAS, CANVAS, 0.0),
        }
    }

    fn paint(&mut self, shade: f64, inside: impl Fn(f64, f64) -> bool) {
        for row in 0..CANVAS {
            for col in 0..CANVAS {
                if inside(row as f64, col as f64) {
                    self.values[(row, col)] = self.values[(row, col)].max(shade);
                }
            }
        }
    }
}

/// Axis frame rotated by `angle_deg` about (cy, cx): `u` follows rows at
/// angle 0 and `v` follows columns, matching the filter bank's convention
/// that a 0-degree bar is horizontal.
fn rotated(cy: f64, cx: f64, angle_deg: f64, row: f64, col: f64) -> (f64, f64) {
    let theta = angle_deg.to_radians();
    let (dr, dc) = (row - cy, col - cx);
    let u = dr * theta.cos() + dc * theta.sin();
    let v = -dr * theta.sin() + dc * theta.cos();
    (u, v)
}

fn paint_bar(canvas: &mut Canvas, cy: f64, cx: f64, angle: f64, half_len: f64, half_thick: f64, shade: f64) {
    canvas.paint(shade, |r, c| {
        let (u, v) = rotated(cy, cx, angle, r, c);
        u.abs() <= half_thick && v.abs() <= half_len
    });
}

fn paint_corner(canvas: &mut Canvas, cy: f64, cx: f64, angle: f64, arm: f64, half_thick: f64, shade: f64) {
    canvas.paint(shade, |r, c| {
        let (u, v) = rotated(cy, cx, angle, r, c);
        let along_v = u.abs() <= half_thick && (-half_thick..=arm).contains(&v);
        let along_u = v.abs() <= half_thick && (-half_thick..=arm).contains(&u);
        along_v || along_u
    });
}

fn paint_cup(canvas: &mut Canvas, scale: f64) {
    let (cy, cx) = (52.0, 50.0);
    let half_w = 22.0 * scale;
    let half_h = 20.0 * scale;
    let wall = 6.0 * scale;
    canvas.paint(1.0, |r, c| {
        let (dr, dc) = (r - cy, c - cx);
        let outer = dr.abs() <= half_h && dc.abs() <= half_w;
        // The cavity opens upward; the bottom and side walls stay solid.
        let inner = dr >= -half_h - 1.0 && dr <= half_h - wall && dc.abs() <= half_w - wall;
        outer && !inner
    });
}

fn paint_hand(canvas: &mut Canvas, scale: f64) {
    let palm_top = 55.0;
    let palm_bottom = (palm_top + 24.0 * scale).min(99.0);
    let palm_left = 50.0 - 16.0 * scale;
    let palm_right = 50.0 + 16.0 * scale;
    canvas.paint(1.0, |r, c| {
        r >= palm_top && r <= palm_bottom && c >= palm_left && c <= palm_right
    });
    let lengths = [16.0, 22.0, 25.0, 22.0, 13.0];
    for (k, len) in lengths.iter().enumerate() {
        let left = palm_left + (k as f64) * 7.0 * scale;
        let right = left + 4.0 * scale;
        let top = palm_top - len * scale;
        canvas.paint(1.0, move |r, c| {
            r >= top && r < palm_top && c >= left && c <= right
        });
    }
}

/// Renders one spec. The same (spec, seed) pair always produces the same
/// retina; only composites consume the seed.
pub fn generate(spec: &ShapeSpec, seed: u64) -> Retina {
    let mut canvas = Canvas::new();
    let center = (CANVAS as f64 - 1.0) / 2.0;
    match spec.kind {
        ShapeKind::Bar => {
            paint_bar(
                &mut canvas,
                center,
                center,
                spec.angle_deg,
                35.0 * spec.scale,
                2.5 * spec.scale,
                1.0,
            );
        }
        ShapeKind::Corner => {
            paint_corner(
                &mut canvas,
                center - 10.0 * spec.scale,
                center - 10.0 * spec.scale,
                spec.angle_deg,
                32.0 * spec.scale,
                2.5 * spec.scale,
                1.0,
            );
        }
        ShapeKind::Cup => paint_cup(&mut canvas, spec.scale),
        ShapeKind::Hand => paint_hand(&mut canvas, spec.scale),
        ShapeKind::Composite => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..spec.count {
                let cy = rng.gen_range(18.0..82.0);
                let cx = rng.gen_range(18.0..82.0);
                let angle = [0.0, 45.0, 90.0, 135.0][rng.gen_range(0..4)];
                let shade = [0.6, 0.8, 1.0][rng.gen_range(0..3)];
                if rng.gen_bool(0.5) {
                    paint_bar(&mut canvas, cy, cx, angle, 12.0 * spec.scale, 2.5 * spec.scale, shade);
                } else {
                    paint_corner(&mut canvas, cy, cx, angle, 11.0 * spec.scale, 2.5 * spec.scale, shade);
                }
            }
        }
    }
    Retina::from_intensities(&canvas.values)
}

/// The standard ten-stimulus presentation set.
pub fn default_catalog() -> Vec<ShapeSpec> {
    vec![
        ShapeSpec::new(ShapeKind::Bar),
        ShapeSpec::new(ShapeKind::Bar).with_angle(45.0),
        ShapeSpec::new(ShapeKind::Bar).with_angle(90.0),
        ShapeSpec::new(ShapeKind::Bar).with_angle(135.0),
        ShapeSpec::new(ShapeKind::Corner),
        ShapeSpec::new(ShapeKind::Corner).with_angle(90.0),
        ShapeSpec::new(ShapeKind::Cup),
        ShapeSpec::new(ShapeKind::Cup).with_scale(0.7),
        ShapeSpec::new(ShapeKind::Hand),
        ShapeSpec::new(ShapeKind::Composite).with_count(8),
    ]
}
