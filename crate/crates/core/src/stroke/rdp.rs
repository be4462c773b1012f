//! Ramer-Douglas-Peucker polyline simplification.

use super::Point;

/// Distance from `p` to the segment `a`-`b`.
pub(crate) fn segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let len_sq = vx * vx + vy * vy;
    if len_sq == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * vx + (p.y - a.y) * vy) / len_sq).clamp(0.0, 1.0);
    p.distance(&Point::new(a.x + t * vx, a.y + t * vy))
}

/// Simplifies a polyline, keeping both endpoints.
///
/// Every dropped point lies within `epsilon` of the segment that replaced it.
/// `epsilon <= 0` returns the input unchanged.
pub fn rdp_simplify(points: &[Point], epsilon: f64) -> Vec<Point> {
    if points.len() <= 2 || epsilon <= 0.0 {
        return points.to_vec();
    }
    let mut keep = vec![false; points.len()];
    keep[0] = true;
    keep[points.len() - 1] = true;
    let mut stack = vec![(0usize, points.len() - 1)];
    while let Some((start, end)) = stack.pop() {
        if end <= start + 1 {
            continue;
        }
        let (a, b) = (&points[start], &points[end]);
        let (idx, dist) = (start + 1..end)
            .map(|i| (i, segment_distance(&points[i], a, b)))
            .fold((start, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if dist > epsilon {
            keep[idx] = true;
            stack.push((start, idx));
            stack.push((idx, end));
        }
    }
    points
        .iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(*p))
        .collect()
}
