//! Projected marker grid for bootstrapping the projector map.

use crate::stroke::{PlayerChannel, Point};
use crate::vision::{
    classify_channels, detect_blobs, for_each_covered_pixel, ColorPalette, Raster,
};

use super::CalibrationError;

/// Fraction of each projector dimension kept clear around the grid.
const MARGIN: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct MarkerPattern {
    /// Marker centers in projector pixels, row-major over the grid.
    pub points: Vec<Point>,
    pub radius: f64,
    /// Black discs on white, at projector resolution.
    pub raster: Raster,
}

fn grid_shape(n: usize, aspect: f64) -> (usize, usize) {
    let rows = ((n as f64 / aspect).sqrt().round() as usize).max(2);
    let cols = n.div_ceil(rows).max(2);
    (cols, rows)
}

/// Lays out `n` disc markers on a grid inset from the projector edges.
pub fn marker_pattern(
    n: usize,
    projector_size: (u32, u32),
) -> Result<MarkerPattern, CalibrationError> {
    if n < 4 {
        return Err(CalibrationError::TooFewMarkers(n));
    }
    let (w, h) = (projector_size.0 as f64, projector_size.1 as f64);
    let radius = (w.min(h) / 60.0).max(2.0);
    let (x0, y0) = ((w * MARGIN).round(), (h * MARGIN).round());
    let (x1, y1) = ((w * (1.0 - MARGIN)).round(), (h * (1.0 - MARGIN)).round());
    let spacing = 4.0 * radius;
    let max_cols = ((x1 - x0) / spacing).floor() as usize + 1;
    let max_rows = ((y1 - y0) / spacing).floor() as usize + 1;
    let (cols, rows) = grid_shape(n, (x1 - x0) / (y1 - y0));
    if cols > max_cols || rows > max_rows {
        return Err(CalibrationError::MarkerCapacity {
            requested: n,
            capacity: max_cols.min(cols.max(2)) * max_rows,
        });
    }
    let points: Vec<Point> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .take(n)
        .map(|(r, c)| {
            Point::new(
                x0 + (x1 - x0) * c as f64 / (cols - 1) as f64,
                y0 + (y1 - y0) * r as f64 / (rows - 1) as f64,
            )
        })
        .collect();
    let mut raster = Raster::new(projector_size.0, projector_size.1, [255, 255, 255])
        .map_err(|e| CalibrationError::Invalid(e.to_string()))?;
    let ink = PlayerChannel::Black.rgb();
    for p in &points {
        for_each_covered_pixel(&[*p], radius, projector_size.0, projector_size.1, |x, y| {
            raster.set(x, y, ink)
        });
    }
    Ok(MarkerPattern {
        points,
        radius,
        raster,
    })
}

/// Finds marker centers in a capture: black-channel blobs of at least
/// `min_area` pixels, in row-major order of their first pixel.
pub fn detect_markers(capture: &Raster, palette: &ColorPalette, min_area: usize) -> Vec<Point> {
    let masks = classify_channels(capture, palette);
    detect_blobs(masks.get(PlayerChannel::Black))
        .into_iter()
        .filter(|b| b.area >= min_area)
        .map(|b| b.centroid)
        .collect()
}
