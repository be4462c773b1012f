//! Illumination flattening.
//!
//! The background is estimated per color channel with a morphological
//! closing (max filter then min filter) that erases dark strokes narrower
//! than the window, smoothed by a box blur of the same window. Each pixel is
//! then divided by its background estimate and rescaled to 8 bits.

use std::collections::VecDeque;

use crate::par::{map_range, Execution};

use super::Raster;

/// Background window used for an image: at least 1/8 of the smaller side,
/// odd, and no smaller than 3.
pub fn background_window(width: u32, height: u32) -> usize {
    let w = (width.min(height) as usize).div_ceil(8).max(3);
    w | 1
}

/// Sliding max (or min) over a centered window of `2 * radius + 1`, clamped
/// at the borders.
fn sliding_extreme(line: &[f32], radius: usize, take_max: bool, out: &mut [f32]) {
    let n = line.len();
    let better = |a: f32, b: f32| if take_max { a >= b } else { a <= b };
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for (i, slot) in out.iter_mut().enumerate() {
        let hi = (i + radius).min(n - 1);
        while next <= hi {
            while let Some(&back) = window.back() {
                if better(line[next], line[back]) {
                    window.pop_back();
                } else {
                    break;
                }
            }
            window.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(radius);
        while let Some(&front) = window.front() {
            if front < lo {
                window.pop_front();
            } else {
                break;
            }
        }
        *slot = line[*window.front().expect("window never empty")];
    }
}

/// Centered box mean over `2 * radius + 1`, with the window shrunk at borders.
fn box_mean(line: &[f32], radius: usize, out: &mut [f32]) {
    let mut prefix = Vec::with_capacity(line.len() + 1);
    prefix.push(0.0f64);
    for v in line {
        prefix.push(prefix.last().unwrap() + *v as f64);
    }
    for (i, slot) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius + 1).min(line.len());
        *slot = ((prefix[hi] - prefix[lo]) / (hi - lo) as f64) as f32;
    }
}

type LineOp = fn(&[f32], usize, &mut [f32]);

/// Applies a 1-D operation along rows, then along columns.
fn separable(plane: &[f32], width: usize, height: usize, radius: usize, op: LineOp) -> Vec<f32> {
    let rows = map_range(Execution::Parallel, height, |y| {
        let mut out = vec![0.0; width];
        op(&plane[y * width..(y + 1) * width], radius, &mut out);
        out
    })
    .concat();
    let cols = map_range(Execution::Parallel, width, |x| {
        let col: Vec<f32> = (0..height).map(|y| rows[y * width + x]).collect();
        let mut out = vec![0.0; height];
        op(&col, radius, &mut out);
        out
    });
    let mut result = vec![0.0; width * height];
    for (x, col) in cols.iter().enumerate() {
        for (y, v) in col.iter().enumerate() {
            result[y * width + x] = *v;
        }
    }
    result
}

fn max_line(line: &[f32], r: usize, out: &mut [f32]) {
    sliding_extreme(line, r, true, out)
}

fn min_line(line: &[f32], r: usize, out: &mut [f32]) {
    sliding_extreme(line, r, false, out)
}

/// Background illumination estimate for one channel plane.
pub fn estimate_background(plane: &[f32], width: usize, height: usize, window: usize) -> Vec<f32> {
    let r = window / 2;
    let dilated = separable(plane, width, height, r, max_line);
    let closed = separable(&dilated, width, height, r, min_line);
    separable(&closed, width, height, r, box_mean)
}

/// Divides the image by its estimated background illumination.
pub fn flat_field_correct(img: &Raster) -> Raster {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let window = background_window(img.width(), img.height());
    let mut out = vec![0u8; 3 * w * h];
    for c in 0..3 {
        let plane: Vec<f32> = img
            .pixels()
            .iter()
            .skip(c)
            .step_by(3)
            .map(|v| *v as f32)
            .collect();
        let bg = estimate_background(&plane, w, h, window);
        for (i, (v, b)) in plane.iter().zip(&bg).enumerate() {
            let corrected = if *b <= 0.5 { 0.0 } else { 255.0 * v / b };
            out[3 * i + c] = corrected.round().clamp(0.0, 255.0) as u8;
        }
    }
    Raster::from_pixels(img.width(), img.height(), out).expect("same dimensions as input")
}
