use std::collections::VecDeque;

use crate::stroke::Point;

use super::skeleton::RING;
use super::Mask;

/// An 8-connected component of a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    /// Mean of the pixel centers.
    pub centroid: Point,
    pub area: usize,
    /// `(min_x, min_y, max_x, max_y)`, inclusive pixel indices.
    pub bbox: (u32, u32, u32, u32),
}

/// Connected components, in row-major order of their first pixel.
pub fn detect_blobs(mask: &Mask) -> Vec<Blob> {
    let w = mask.width() as usize;
    let mut seen = vec![false; w * mask.height() as usize];
    let mut blobs = Vec::new();
    for (x0, y0) in mask.iter_set() {
        if seen[y0 as usize * w + x0 as usize] {
            continue;
        }
        seen[y0 as usize * w + x0 as usize] = true;
        let mut queue = VecDeque::from([(x0, y0)]);
        let (mut sx, mut sy, mut area) = (0.0, 0.0, 0usize);
        let mut bbox = (x0, y0, x0, y0);
        while let Some((x, y)) = queue.pop_front() {
            sx += x as f64 + 0.5;
            sy += y as f64 + 0.5;
            area += 1;
            bbox = (bbox.0.min(x), bbox.1.min(y), bbox.2.max(x), bbox.3.max(y));
            for (dx, dy) in RING {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if mask.get(nx, ny) {
                    let i = ny as usize * w + nx as usize;
                    if !seen[i] {
                        seen[i] = true;
                        queue.push_back((nx as u32, ny as u32));
                    }
                }
            }
        }
        blobs.push(Blob {
            centroid: Point::new(sx / area as f64, sy / area as f64),
            area,
            bbox,
        });
    }
    blobs
}
