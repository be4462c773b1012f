//! Vector stroke data model shared by every other module.
//!
//! Canvas coordinates are millimeters with the origin at the top-left corner,
//! x growing rightward and y growing downward.

mod distance;
mod normalize;
mod rdp;
mod stroke5;
mod transform;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use distance::{densify, hausdorff, point_polyline_distance};
pub(crate) use normalize::scale_offsets;
pub use normalize::{normalize_offsets, offset_rms};
pub use rdp::rdp_simplify;
pub use stroke5::{from_stroke5, to_stroke5, Decoded, Pen, Stroke5Row};
pub use transform::{transform_sketch, Affine, PlaneMap};

/// Default canvas: a 110 x 160 cm painting, in millimeters.
pub const DEFAULT_CANVAS_MM: (f64, f64) = (1100.0, 1600.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrokeError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite coordinate in stroke {stroke}, point {point}")]
    NonFinite { stroke: usize, point: usize },
    #[error("point ({x}, {y}) in stroke {stroke} lies outside the {width} x {height} canvas")]
    OutOfCanvas {
        stroke: usize,
        x: f64,
        y: f64,
        width: f64,
        height: f64,
    },
    #[error("map is not invertible")]
    NotInvertible,
    #[error("point maps to infinity")]
    PointAtInfinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Color identity of a contributor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlayerChannel {
    /// Theme strokes laid down before the game starts.
    Black,
    Red,
    Green,
    /// The machine. No human is ever assigned this color.
    Blue,
}

impl PlayerChannel {
    pub const ALL: [PlayerChannel; 4] = [
        PlayerChannel::Black,
        PlayerChannel::Red,
        PlayerChannel::Green,
        PlayerChannel::Blue,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PlayerChannel::Black => "black",
            PlayerChannel::Red => "red",
            PlayerChannel::Green => "green",
            PlayerChannel::Blue => "blue",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }

    /// Display color as RGB.
    pub fn rgb(&self) -> [u8; 3] {
        match self {
            PlayerChannel::Black => [20, 20, 20],
            PlayerChannel::Red => [210, 30, 30],
            PlayerChannel::Green => [30, 160, 60],
            PlayerChannel::Blue => [30, 70, 220],
        }
    }
}

impl fmt::Display for PlayerChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlayerChannel {
    type Err = StrokeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "black" => Ok(PlayerChannel::Black),
            "red" => Ok(PlayerChannel::Red),
            "green" => Ok(PlayerChannel::Green),
            "blue" => Ok(PlayerChannel::Blue),
            other => Err(StrokeError::InvalidInput(format!(
                "unknown channel {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub channel: PlayerChannel,
    pub points: Vec<Point>,
}

impl Stroke {
    pub fn new(channel: PlayerChannel, points: Vec<Point>) -> Self {
        Self { channel, points }
    }

    /// Builds a stroke, merging consecutive duplicate points.
    pub fn merged(channel: PlayerChannel, points: impl IntoIterator<Item = Point>) -> Self {
        let mut out: Vec<Point> = Vec::new();
        for p in points {
            if out.last() != Some(&p) {
                out.push(p);
            }
        }
        Self {
            channel,
            points: out,
        }
    }

    /// Polyline arc length.
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sketch {
    #[serde(rename = "canvas")]
    pub canvas_size: (f64, f64),
    pub strokes: Vec<Stroke>,
}

impl Default for Sketch {
    fn default() -> Self {
        Self::empty(DEFAULT_CANVAS_MM)
    }
}

impl Sketch {
    pub fn new(canvas_size: (f64, f64), strokes: Vec<Stroke>) -> Self {
        Self {
            canvas_size,
            strokes,
        }
    }

    pub fn empty(canvas_size: (f64, f64)) -> Self {
        Self::new(canvas_size, Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }

    pub fn point_count(&self) -> usize {
        self.strokes.iter().map(|s| s.points.len()).sum()
    }

    /// Checks canvas size, finiteness, non-empty strokes and canvas bounds.
    pub fn validate(&self) -> Result<(), StrokeError> {
        let (w, h) = self.canvas_size;
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(StrokeError::InvalidInput(format!(
                "canvas size must be positive, got {w} x {h}"
            )));
        }
        for (si, stroke) in self.strokes.iter().enumerate() {
            if stroke.points.is_empty() {
                return Err(StrokeError::InvalidInput(format!(
                    "stroke {si} has no points"
                )));
            }
            for (pi, p) in stroke.points.iter().enumerate() {
                if !p.is_finite() {
                    return Err(StrokeError::NonFinite {
                        stroke: si,
                        point: pi,
                    });
                }
                if p.x < 0.0 || p.y < 0.0 || p.x > w || p.y > h {
                    return Err(StrokeError::OutOfCanvas {
                        stroke: si,
                        x: p.x,
                        y: p.y,
                        width: w,
                        height: h,
                    });
                }
            }
        }
        Ok(())
    }

    /// Clamps every point into the canvas rectangle.
    pub fn clamp_to_canvas(&mut self) {
        let (w, h) = self.canvas_size;
        for p in self.strokes.iter_mut().flat_map(|s| s.points.iter_mut()) {
            p.x = p.x.clamp(0.0, w);
            p.y = p.y.clamp(0.0, h);
        }
    }

    pub fn with_channel(mut self, channel: PlayerChannel) -> Self {
        for s in &mut self.strokes {
            s.channel = channel;
        }
        self
    }

    pub fn extend(&mut self, other: &Sketch) {
        self.strokes.extend(other.strokes.iter().cloned());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sketch serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, StrokeError> {
        serde_json::from_str(text).map_err(|e| StrokeError::InvalidInput(e.to_string()))
    }
}
