use super::rdp::segment_distance;
use super::Point;

/// Distance from `p` to the nearest point of a polyline.
pub fn point_polyline_distance(p: &Point, line: &[Point]) -> f64 {
    match line.len() {
        0 => f64::INFINITY,
        1 => p.distance(&line[0]),
        _ => line
            .windows(2)
            .map(|w| segment_distance(p, &w[0], &w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Points along a polyline no further than `step` apart, vertices included.
pub fn densify(line: &[Point], step: f64) -> Vec<Point> {
    let mut out = Vec::new();
    for w in line.windows(2) {
        let n = (w[0].distance(&w[1]) / step).ceil().max(1.0) as usize;
        for k in 0..n {
            let t = k as f64 / n as f64;
            out.push(Point::new(
                w[0].x + t * (w[1].x - w[0].x),
                w[0].y + t * (w[1].y - w[0].y),
            ));
        }
    }
    out.extend(line.last().copied());
    out
}

/// Symmetric Hausdorff distance between two polylines.
///
/// Each polyline is sampled every `step` units, so the result may
/// underestimate the exact distance by at most `step`.
pub fn hausdorff(a: &[Point], b: &[Point], step: f64) -> f64 {
    let directed = |from: &[Point], to: &[Point]| {
        densify(from, step)
            .iter()
            .map(|p| point_polyline_distance(p, to))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}
