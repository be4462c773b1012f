//! Hard-edged polyline rasterization, used for the projector overlay and for
//! synthetic captures.

use crate::calibration::Homography;
use crate::stroke::{PlayerChannel, Point, Sketch};

use super::raster::rgba_png_bytes;
use super::{Raster, VisionError};

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let len_sq = vx * vx + vy * vy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * vx + (p.y - a.y) * vy) / len_sq).clamp(0.0, 1.0)
    };
    p.distance(&Point::new(a.x + t * vx, a.y + t * vy))
}

/// Calls `f` for every pixel whose center lies within `radius` of the
/// polyline. A pixel may be visited more than once.
pub fn for_each_covered_pixel(
    points: &[Point],
    radius: f64,
    width: u32,
    height: u32,
    mut f: impl FnMut(u32, u32),
) {
    let segments: Vec<(Point, Point)> = match points.len() {
        0 => return,
        1 => vec![(points[0], points[0])],
        _ => points.windows(2).map(|w| (w[0], w[1])).collect(),
    };
    for (a, b) in segments {
        let x0 = (a.x.min(b.x) - radius - 1.0).floor().max(0.0) as i64;
        let x1 = (a.x.max(b.x) + radius + 1.0).ceil().min(width as f64 - 1.0) as i64;
        let y0 = (a.y.min(b.y) - radius - 1.0).floor().max(0.0) as i64;
        let y1 = (a.y.max(b.y) + radius + 1.0)
            .ceil()
            .min(height as f64 - 1.0) as i64;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let c = Point::new(x as f64 + 0.5, y as f64 + 0.5);
                if segment_distance(c, a, b) <= radius {
                    f(x as u32, y as u32);
                }
            }
        }
    }
}

fn strokes_in_px(
    sketch: &Sketch,
    to_px: &Homography,
) -> Result<Vec<(PlayerChannel, Vec<Point>)>, VisionError> {
    sketch
        .strokes
        .iter()
        .map(|s| {
            let pts = s
                .points
                .iter()
                .map(|p| to_px.map_point(*p))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((s.channel, pts))
        })
        .collect()
}

/// Paints a sketch onto a white canvas image using each channel's color.
pub fn render_sketch(
    sketch: &Sketch,
    to_px: &Homography,
    width: u32,
    height: u32,
    stroke_width_px: f64,
) -> Result<Raster, VisionError> {
    let mut img = Raster::new(width, height, [255, 255, 255])?;
    paint_sketch(&mut img, sketch, to_px, stroke_width_px)?;
    Ok(img)
}

/// Paints a sketch over an existing image.
pub fn paint_sketch(
    img: &mut Raster,
    sketch: &Sketch,
    to_px: &Homography,
    stroke_width_px: f64,
) -> Result<(), VisionError> {
    let (w, h) = (img.width(), img.height());
    for (channel, pts) in strokes_in_px(sketch, to_px)? {
        let rgb = channel.rgb();
        for_each_covered_pixel(&pts, stroke_width_px / 2.0, w, h, |x, y| img.set(x, y, rgb));
    }
    Ok(())
}

/// Draws strokes in a single color on a transparent background and encodes
/// the result as PNG.
pub fn render_overlay_png(
    sketch: &Sketch,
    to_px: &Homography,
    width: u32,
    height: u32,
    stroke_width_px: f64,
    rgb: [u8; 3],
) -> Result<Vec<u8>, VisionError> {
    if width == 0 || height == 0 {
        return Err(VisionError::InvalidRaster("empty overlay".into()));
    }
    let mut rgba = vec![0u8; 4 * width as usize * height as usize];
    for (_, pts) in strokes_in_px(sketch, to_px)? {
        for_each_covered_pixel(&pts, stroke_width_px / 2.0, width, height, |x, y| {
            let i = 4 * (y as usize * width as usize + x as usize);
            rgba[i..i + 4].copy_from_slice(&[rgb[0], rgb[1], rgb[2], 255]);
        });
    }
    Ok(rgba_png_bytes(width, height, rgba))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stroke::Stroke;

    #[test]
    fn three_px_horizontal_line() {
        let mut hits = std::collections::BTreeSet::new();
        for_each_covered_pixel(
            &[Point::new(5.5, 5.5), Point::new(10.5, 5.5)],
            1.5,
            20,
            20,
            |x, y| {
                hits.insert((x, y));
            },
        );
        let rows: std::collections::BTreeSet<u32> = hits.iter().map(|p| p.1).collect();
        assert_eq!(rows.into_iter().collect::<Vec<_>>(), vec![4, 5, 6]);
        assert!(hits.contains(&(4, 5)) && hits.contains(&(11, 5)));
        assert!(!hits.contains(&(3, 5)) && !hits.contains(&(12, 5)));
    }

    #[test]
    fn overlay_is_transparent_outside_strokes() {
        let sketch = Sketch::new(
            (10.0, 10.0),
            vec![Stroke::new(
                PlayerChannel::Blue,
                vec![Point::new(1.0, 1.0), Point::new(8.0, 8.0)],
            )],
        );
        let png =
            render_overlay_png(&sketch, &Homography::IDENTITY, 10, 10, 2.0, [0, 0, 255]).unwrap();
        let img = image::load_from_memory(&png).unwrap().to_rgba8();
        assert_eq!(img.get_pixel(9, 0).0[3], 0);
        assert_eq!(img.get_pixel(4, 4).0, [0, 0, 255, 255]);
    }
}
