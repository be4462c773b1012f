//! Projective maps between the camera, canvas and projector planes.
//!
//! A [`Homography`] is estimated from point correspondences with the
//! normalized direct linear transform: both point sets are translated to
//! zero mean and scaled to mean distance sqrt(2) before the null vector of
//! the design matrix is extracted by SVD.

mod markers;
mod store;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stroke::{PlaneMap, Point, StrokeError};

pub use markers::{detect_markers, marker_pattern, MarkerPattern};
pub use store::{Calibration, CalibrationEntry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("need at least 4 correspondences, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate {set} configuration: points {triple:?} are collinear")]
    Degenerate {
        set: &'static str,
        triple: [usize; 3],
    },
    #[error("correspondences do not determine a unique map")]
    RankDeficient,
    #[error("homography is not invertible")]
    NotInvertible,
    #[error("point ({x}, {y}) maps to infinity")]
    PointAtInfinity { x: f64, y: f64 },
    #[error("non-finite correspondence at index {0}")]
    NonFinite(usize),
    #[error("cannot fit {requested} markers, grid capacity is {capacity}")]
    MarkerCapacity { requested: usize, capacity: usize },
    #[error("need at least 4 markers, got {0}")]
    TooFewMarkers(usize),
    #[error("no map from {from} to {to}")]
    MissingMap { from: Frame, to: Frame },
    #[error("invalid calibration data: {0}")]
    Invalid(String),
}

/// The three planes of the installation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Camera pixels.
    Camera,
    /// Canvas millimeters.
    Canvas,
    /// Projector pixels.
    Projector,
}

impl Frame {
    pub const ALL: [Frame; 3] = [Frame::Camera, Frame::Canvas, Frame::Projector];
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Camera => "camera",
            Frame::Canvas => "canvas",
            Frame::Projector => "projector",
        })
    }
}

impl FromStr for Frame {
    type Err = CalibrationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "camera" => Ok(Frame::Camera),
            "canvas" => Ok(Frame::Canvas),
            "projector" => Ok(Frame::Projector),
            other => Err(CalibrationError::Invalid(format!(
                "unknown frame {other:?}"
            ))),
        }
    }
}

/// 3x3 projective map, stored row-major and scaled so that `h33 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 9]", into = "[f64; 9]")]
pub struct Homography([f64; 9]);

impl Homography {
    pub const IDENTITY: Homography = Homography([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);

    /// Builds a homography from row-major entries, normalizing `h33` to 1.
    pub fn new(m: [f64; 9]) -> Result<Self, CalibrationError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(CalibrationError::Invalid("non-finite matrix entry".into()));
        }
        let s = m[8];
        if s.abs() < 1e-12 {
            return Err(CalibrationError::Invalid(
                "h33 vanishes, cannot normalize".into(),
            ));
        }
        let h = Homography(m.map(|v| v / s));
        if h.det().abs() <= 1e-12 {
            return Err(CalibrationError::NotInvertible);
        }
        Ok(h)
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Homography([1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0])
    }

    pub fn scale(sx: f64, sy: f64) -> Self {
        Homography([sx, 0.0, 0.0, 0.0, sy, 0.0, 0.0, 0.0, 1.0])
    }

    pub fn entries(&self) -> [f64; 9] {
        self.0
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.0)
    }

    fn from_matrix(m: &Matrix3<f64>) -> Result<Self, CalibrationError> {
        let mut v = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                v[3 * r + c] = m[(r, c)];
            }
        }
        Self::new(v)
    }

    pub fn det(&self) -> f64 {
        self.matrix().determinant()
    }

    pub fn inverse(&self) -> Result<Self, CalibrationError> {
        let inv = self
            .matrix()
            .try_inverse()
            .ok_or(CalibrationError::NotInvertible)?;
        Self::from_matrix(&inv)
    }

    /// The map that applies `self` first, then `next`.
    pub fn then(&self, next: &Homography) -> Result<Self, CalibrationError> {
        Self::from_matrix(&(next.matrix() * self.matrix()))
    }

    /// Applies the map with perspective divide.
    pub fn map_point(&self, p: Point) -> Result<Point, CalibrationError> {
        if !p.is_finite() {
            return Err(CalibrationError::Invalid("non-finite point".into()));
        }
        let h = &self.0;
        let w = h[6] * p.x + h[7] * p.y + h[8];
        if w.abs() < 1e-12 {
            return Err(CalibrationError::PointAtInfinity { x: p.x, y: p.y });
        }
        Ok(Point::new(
            (h[0] * p.x + h[1] * p.y + h[2]) / w,
            (h[3] * p.x + h[4] * p.y + h[5]) / w,
        ))
    }
}

impl Default for Homography {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl TryFrom<[f64; 9]> for Homography {
    type Error = CalibrationError;

    fn try_from(m: [f64; 9]) -> Result<Self, Self::Error> {
        Homography::new(m)
    }
}

impl From<Homography> for [f64; 9] {
    fn from(h: Homography) -> Self {
        h.0
    }
}

impl PlaneMap for Homography {
    fn map(&self, p: Point) -> Result<Point, StrokeError> {
        self.map_point(p).map_err(|_| StrokeError::PointAtInfinity)
    }

    fn is_invertible(&self) -> bool {
        let d = self.det();
        d.is_finite() && d.abs() > 1e-12
    }
}

/// Point correspondences from one frame to another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    pub from: Frame,
    pub to: Frame,
    /// `(source, destination)` pairs.
    pub correspondences: Vec<(Point, Point)>,
}

impl CalibrationSet {
    pub fn new(from: Frame, to: Frame, correspondences: Vec<(Point, Point)>) -> Self {
        Self {
            from,
            to,
            correspondences,
        }
    }

    pub fn sources(&self) -> Vec<Point> {
        self.correspondences.iter().map(|c| c.0).collect()
    }

    pub fn destinations(&self) -> Vec<Point> {
        self.correspondences.iter().map(|c| c.1).collect()
    }
}

fn cross(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Rejects point sets that cannot pin down a homography.
///
/// With exactly four points no three may be collinear. With more points the
/// set is degenerate only when all but at most one of them share a line.
fn check_configuration(points: &[Point], set: &'static str) -> Result<(), CalibrationError> {
    let n = points.len();
    let extent = points
        .iter()
        .flat_map(|p| points.iter().map(move |q| p.distance(q)))
        .fold(0.0, f64::max);
    let tol = 1e-9 * extent * extent;
    let collinear =
        |i: usize, j: usize, k: usize| cross(&points[i], &points[j], &points[k]).abs() <= tol;
    for i in 0..n {
        for j in i + 1..n {
            if points[i].distance(&points[j]) <= 1e-12 * extent.max(1.0) {
                let k = (0..n).find(|&k| k != i && k != j).unwrap_or(j);
                return Err(CalibrationError::Degenerate {
                    set,
                    triple: [i, j, k],
                });
            }
            let on_line: Vec<usize> = (0..n)
                .filter(|&k| k != i && k != j && collinear(i, j, k))
                .collect();
            if let Some(&k) = on_line.first() {
                if n == 4 || on_line.len() + 2 >= n - 1 {
                    let mut triple = [i, j, k];
                    triple.sort_unstable();
                    return Err(CalibrationError::Degenerate { set, triple });
                }
            }
        }
    }
    Ok(())
}

/// Hartley normalization: returns the normalized points and the transform used.
fn normalize_points(points: &[Point]) -> (Vec<Point>, Matrix3<f64>) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let my = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| (p.x - mx).hypot(p.y - my))
        .sum::<f64>()
        / n;
    let s = std::f64::consts::SQRT_2 / mean_dist;
    let t = Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0);
    let normalized = points
        .iter()
        .map(|p| Point::new(s * (p.x - mx), s * (p.y - my)))
        .collect();
    (normalized, t)
}

/// Least-squares homography from correspondences (normalized DLT).
pub fn solve_homography(set: &CalibrationSet) -> Result<Homography, CalibrationError> {
    let n = set.correspondences.len();
    if n < 4 {
        return Err(CalibrationError::TooFewPoints(n));
    }
    if let Some(i) = set
        .correspondences
        .iter()
        .position(|(a, b)| !a.is_finite() || !b.is_finite())
    {
        return Err(CalibrationError::NonFinite(i));
    }
    let src = set.sources();
    let dst = set.destinations();
    check_configuration(&src, "source")?;
    check_configuration(&dst, "destination")?;

    let (src_n, t_src) = normalize_points(&src);
    let (dst_n, t_dst) = normalize_points(&dst);

    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (p, q)) in src_n.iter().zip(&dst_n).enumerate() {
        let (x, y, u, v) = (p.x, p.y, q.x, q.y);
        let r0 = 2 * i;
        let r1 = r0 + 1;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }

    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| CalibrationError::Invalid("svd did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let (smallest, second) = (order[0], order[1]);
    if svd.singular_values[second] <= 1e-10 * svd.singular_values[order[order.len() - 1]] {
        return Err(CalibrationError::RankDeficient);
    }
    let h = v_t.row(smallest);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst.try_inverse().ok_or(CalibrationError::NotInvertible)?;
    Homography::from_matrix(&(t_dst_inv * hn * t_src))
}

/// Root-mean-square distance between mapped sources and their destinations.
pub fn reprojection_rmse(h: &Homography, set: &CalibrationSet) -> Result<f64, CalibrationError> {
    if set.correspondences.is_empty() {
        return Err(CalibrationError::TooFewPoints(0));
    }
    let mut sum_sq = 0.0;
    for (src, dst) in &set.correspondences {
        let d = h.map_point(*src)?.distance(dst);
        sum_sq += d * d;
    }
    Ok((sum_sq / set.correspondences.len() as f64).sqrt())
}
