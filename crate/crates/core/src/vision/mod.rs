//! Raster captures to ordered, color-attributed vector strokes.
//!
//! The pipeline is: illumination flattening, per-pixel channel
//! classification, thinning of each channel mask, then tracing the
//! skeleton into polylines mapped to the canvas frame. Free stroke ends,
//! which thinning pulls back, are pushed out to where the ink ends. A raster does not
//! record drawing direction, so each stroke is ordered from its end nearest
//! the top-left corner.

mod blobs;
mod classify;
mod flatfield;
mod raster;
mod render;
mod skeleton;
mod trace;

use std::path::Path;

use thiserror::Error;

use crate::calibration::{CalibrationError, Homography};
use crate::par::{map_collect, Execution};
use crate::stroke::{hausdorff, PlayerChannel, Sketch, Stroke};

pub use blobs::{detect_blobs, Blob};
pub use classify::{classify_channels, hsv, ChannelMasks, ColorPalette};
pub use flatfield::{background_window, estimate_background, flat_field_correct};
pub use raster::{rgba_png_bytes, Mask, Raster};
pub use render::{for_each_covered_pixel, paint_sketch, render_overlay_png, render_sketch};
pub use skeleton::{skeletonize, zhang_suen};
pub use trace::{restore_tips, trace_paths, trace_strokes, TraceOptions};

/// Strokes closer than this (Hausdorff, canvas mm) to an existing stroke of
/// the same channel are considered already known.
pub const DUPLICATE_TOLERANCE_MM: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisionError {
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("image decoding failed: {0}")]
    Image(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("invalid palette: {0}")]
    Palette(String),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

/// Intermediate products of one pipeline run.
#[derive(Debug, Clone)]
pub struct Vectorized {
    pub sketch: Sketch,
    pub corrected: Raster,
    pub masks: ChannelMasks,
    pub skeletons: Vec<(PlayerChannel, Mask)>,
}

impl Vectorized {
    /// Writes the corrected capture and every mask as PNG files into `dir`.
    pub fn write_debug(&self, dir: impl AsRef<Path>) -> Result<(), VisionError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| VisionError::Io(e.to_string()))?;
        let write = |name: String, bytes: Vec<u8>| {
            std::fs::write(dir.join(name), bytes).map_err(|e| VisionError::Io(e.to_string()))
        };
        write("corrected.png".into(), self.corrected.to_png_bytes())?;
        for (ch, m) in self.masks.iter() {
            write(format!("mask_{ch}.png"), m.to_png_bytes())?;
        }
        for (ch, m) in &self.skeletons {
            write(format!("skeleton_{ch}.png"), m.to_png_bytes())?;
        }
        Ok(())
    }
}

/// Runs the full pipeline on a capture.
///
/// `px_to_mm` maps capture pixels to the canvas frame; strokes are clamped
/// into `canvas_size`.
pub fn vectorize(
    capture: &Raster,
    palette: &ColorPalette,
    px_to_mm: &Homography,
    canvas_size: (f64, f64),
    opts: &TraceOptions,
) -> Result<Vectorized, VisionError> {
    let corrected = flat_field_correct(capture);
    let masks = classify_channels(&corrected, palette);
    let channels: Vec<(PlayerChannel, &Mask)> = masks.iter().collect();
    let traced = map_collect(Execution::Parallel, &channels, |(ch, mask)| {
        let skeleton = skeletonize(mask);
        let mut paths = trace_paths(&skeleton, opts);
        restore_tips(&mut paths, &skeleton, mask);
        (*ch, skeleton, paths)
    });
    let mut ordered = Vec::new();
    let mut skeletons = Vec::new();
    for (ch, skeleton, paths) in traced {
        skeletons.push((ch, skeleton));
        for pts in paths {
            ordered.push((pts[0], ch, pts));
        }
    }
    ordered.sort_by(|a, b| {
        a.0.y
            .total_cmp(&b.0.y)
            .then(a.0.x.total_cmp(&b.0.x))
            .then(a.1.cmp(&b.1))
    });
    let strokes = ordered
        .into_iter()
        .map(|(_, ch, pts)| {
            let simplified = crate::stroke::rdp_simplify(&pts, opts.rdp_epsilon_px);
            let mapped = simplified
                .into_iter()
                .map(|p| px_to_mm.map_point(p))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Stroke::merged(ch, mapped))
        })
        .collect::<Result<Vec<_>, VisionError>>()?;
    let mut sketch = Sketch::new(canvas_size, strokes);
    sketch.clamp_to_canvas();
    Ok(Vectorized {
        sketch,
        corrected,
        masks,
        skeletons,
    })
}

/// Strokes of `current` that are not already present in `prev`.
///
/// A recovered stroke is known when some stroke of the same channel in `prev`
/// lies within [`DUPLICATE_TOLERANCE_MM`] of it (Hausdorff distance).
pub fn new_strokes(prev: &Sketch, current: &Sketch) -> Sketch {
    let fresh = current
        .strokes
        .iter()
        .filter(|s| {
            !prev.strokes.iter().any(|p| {
                p.channel == s.channel
                    && hausdorff(&p.points, &s.points, 0.25) <= DUPLICATE_TOLERANCE_MM
            })
        })
        .cloned()
        .collect();
    Sketch::new(prev.canvas_size, fresh)
}

/// Runs the pipeline on a capture and keeps only strokes not in `prev`.
pub fn extract_new_strokes(
    prev: &Sketch,
    capture: &Raster,
    palette: &ColorPalette,
    px_to_mm: &Homography,
) -> Result<Sketch, VisionError> {
    let v = vectorize(
        capture,
        palette,
        px_to_mm,
        prev.canvas_size,
        &TraceOptions::default(),
    )?;
    Ok(new_strokes(prev, &v.sketch))
}
