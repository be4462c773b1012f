//! Skeleton to polylines.
//!
//! Skeleton pixels form a graph under 8-adjacency. Pixels with exactly two
//! neighbors are path interiors; everything else is a node. Adjacent
//! junction pixels (three or more neighbors) are grouped into one junction
//! whose centroid becomes the shared point of every path that reaches it.
//! Paths are split at junctions, short spurs hanging off a junction are
//! pruned, and a junction left with exactly two paths joins them back.

use std::cmp::Ordering;
use std::collections::{HashSet, VecDeque};

use crate::calibration::Homography;
use crate::stroke::{rdp_simplify, PlayerChannel, Point, Stroke};

use super::skeleton::{is_tip, RING};
use super::{Mask, VisionError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// Simplification tolerance, in pixels.
    pub rdp_epsilon_px: f64,
    /// Endpoint-to-junction branches with fewer pixels than this are dropped.
    pub min_spur_px: usize,
    /// Paths with fewer pixels than this are dropped as noise.
    pub min_stroke_px: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            rdp_epsilon_px: 1.0,
            min_spur_px: 4,
            min_stroke_px: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum End {
    Tip,
    Junction(usize),
    Closed,
}

#[derive(Debug, Clone)]
struct Path {
    pts: Vec<Point>,
    start: End,
    end: End,
    /// Skeleton pixels covered, excluding junction pixels.
    len_px: usize,
}

impl Path {
    fn reversed(mut self) -> Self {
        self.pts.reverse();
        std::mem::swap(&mut self.start, &mut self.end);
        self
    }
}

fn center(idx: usize, width: usize) -> Point {
    Point::new((idx % width) as f64 + 0.5, (idx / width) as f64 + 0.5)
}

fn row_major(a: &Point, b: &Point) -> Ordering {
    a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x))
}

struct Graph<'a> {
    mask: &'a Mask,
    width: usize,
    degree: Vec<u8>,
    cluster: Vec<usize>,
    centroids: Vec<Point>,
}

const NO_CLUSTER: usize = usize::MAX;

impl<'a> Graph<'a> {
    fn new(mask: &'a Mask) -> Self {
        let width = mask.width() as usize;
        let n = width * mask.height() as usize;
        let mut degree = vec![0u8; n];
        for (x, y) in mask.iter_set() {
            degree[y as usize * width + x as usize] = RING
                .iter()
                .filter(|(dx, dy)| mask.get(x as i64 + dx, y as i64 + dy))
                .count() as u8;
        }
        let mut g = Self {
            mask,
            width,
            degree,
            cluster: vec![NO_CLUSTER; n],
            centroids: Vec::new(),
        };
        g.group_junctions();
        g
    }

    fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = ((idx % self.width) as i64, (idx / self.width) as i64);
        RING.iter().filter_map(move |(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            self.mask
                .get(nx, ny)
                .then(|| ny as usize * self.width + nx as usize)
        })
    }

    fn is_junction(&self, idx: usize) -> bool {
        self.degree[idx] >= 3
    }

    fn group_junctions(&mut self) {
        let junctions: Vec<usize> = self
            .mask
            .iter_set()
            .map(|(x, y)| y as usize * self.width + x as usize)
            .filter(|&i| self.is_junction(i))
            .collect();
        for &seed in &junctions {
            if self.cluster[seed] != NO_CLUSTER {
                continue;
            }
            let id = self.centroids.len();
            let mut members = Vec::new();
            let mut queue = VecDeque::from([seed]);
            self.cluster[seed] = id;
            while let Some(i) = queue.pop_front() {
                members.push(i);
                let next: Vec<usize> = self
                    .neighbors(i)
                    .filter(|&j| self.is_junction(j) && self.cluster[j] == NO_CLUSTER)
                    .collect();
                for j in next {
                    self.cluster[j] = id;
                    queue.push_back(j);
                }
            }
            let k = members.len() as f64;
            let (sx, sy) = members.iter().fold((0.0, 0.0), |(sx, sy), &i| {
                let p = center(i, self.width);
                (sx + p.x, sy + p.y)
            });
            self.centroids.push(Point::new(sx / k, sy / k));
        }
    }

    fn end_of(&self, idx: usize) -> End {
        if self.is_junction(idx) {
            End::Junction(self.cluster[idx])
        } else {
            End::Tip
        }
    }

    fn point_of(&self, idx: usize) -> Point {
        if self.is_junction(idx) {
            self.centroids[self.cluster[idx]]
        } else {
            center(idx, self.width)
        }
    }

    fn make_path(&self, pixels: &[usize], start: End, end: End) -> Path {
        let pts = pixels.iter().map(|&i| self.point_of(i)).collect();
        let len_px = pixels.iter().filter(|&&i| !self.is_junction(i)).count();
        Path {
            pts,
            start,
            end,
            len_px,
        }
    }

    fn trace(&self) -> Vec<Path> {
        let mut visited = vec![false; self.degree.len()];
        let mut seen_edges: HashSet<(usize, usize)> = HashSet::new();
        let mut paths = Vec::new();
        let nodes: Vec<usize> = self
            .mask
            .iter_set()
            .map(|(x, y)| y as usize * self.width + x as usize)
            .filter(|&i| self.degree[i] != 2)
            .collect();
        for &node in &nodes {
            for nb in self.neighbors(node).collect::<Vec<_>>() {
                if self.degree[nb] == 2 {
                    if visited[nb] {
                        continue;
                    }
                    let mut pixels = vec![node, nb];
                    visited[nb] = true;
                    let (mut prev, mut cur) = (node, nb);
                    loop {
                        let Some(next) = self.neighbors(cur).find(|&j| j != prev) else {
                            break;
                        };
                        if self.degree[next] != 2 {
                            pixels.push(next);
                            break;
                        }
                        if visited[next] {
                            break;
                        }
                        visited[next] = true;
                        pixels.push(next);
                        prev = cur;
                        cur = next;
                    }
                    let last = *pixels.last().unwrap();
                    let end = if self.degree[last] == 2 {
                        End::Tip
                    } else {
                        self.end_of(last)
                    };
                    paths.push(self.make_path(&pixels, self.end_of(node), end));
                } else {
                    if self.is_junction(node)
                        && self.is_junction(nb)
                        && self.cluster[node] == self.cluster[nb]
                    {
                        continue;
                    }
                    if !seen_edges.insert((node.min(nb), node.max(nb))) {
                        continue;
                    }
                    paths.push(self.make_path(&[node, nb], self.end_of(node), self.end_of(nb)));
                }
            }
        }
        // closed loops made only of two-neighbor pixels
        let loop_pixels: Vec<usize> = self
            .mask
            .iter_set()
            .map(|(x, y)| y as usize * self.width + x as usize)
            .filter(|&i| self.degree[i] == 2)
            .collect();
        for start in loop_pixels {
            if visited[start] {
                continue;
            }
            visited[start] = true;
            let mut pixels = vec![start];
            let (mut prev, mut cur) = (usize::MAX, start);
            loop {
                let Some(next) = self.neighbors(cur).find(|&j| j != prev) else {
                    break;
                };
                if next == start || visited[next] {
                    pixels.push(next);
                    break;
                }
                visited[next] = true;
                pixels.push(next);
                prev = cur;
                cur = next;
            }
            paths.push(self.make_path(&pixels, End::Closed, End::Closed));
        }
        paths
    }
}

fn prune_and_join(mut paths: Vec<Path>, min_spur_px: usize, clusters: usize) -> Vec<Path> {
    loop {
        let mut changed = false;
        let ends_at = |paths: &[Path], c: usize| -> usize {
            paths
                .iter()
                .map(|p| {
                    (p.start == End::Junction(c)) as usize + (p.end == End::Junction(c)) as usize
                })
                .sum()
        };
        // spurs: tip-to-junction branches that are too short
        let before = paths.len();
        let spur = |p: &Path| {
            let tip_junction = matches!(
                (p.start, p.end),
                (End::Tip, End::Junction(_)) | (End::Junction(_), End::Tip)
            );
            tip_junction && p.len_px < min_spur_px
        };
        // never prune the last branch of a junction
        let mut keep = vec![true; paths.len()];
        for c in 0..clusters {
            let branches: Vec<usize> = (0..paths.len())
                .filter(|&i| paths[i].start == End::Junction(c) || paths[i].end == End::Junction(c))
                .collect();
            let long = branches.iter().filter(|&&i| !spur(&paths[i])).count();
            if long >= 2 {
                for &i in &branches {
                    if spur(&paths[i]) {
                        keep[i] = false;
                    }
                }
            }
        }
        let mut it = keep.iter();
        paths.retain(|_| *it.next().unwrap());
        changed |= paths.len() != before;

        // junctions with exactly two incident ends from distinct paths
        for c in 0..clusters {
            if ends_at(&paths, c) != 2 {
                continue;
            }
            let incident: Vec<usize> = (0..paths.len())
                .filter(|&i| paths[i].start == End::Junction(c) || paths[i].end == End::Junction(c))
                .collect();
            let j = End::Junction(c);
            if incident.len() == 1 {
                let p = &mut paths[incident[0]];
                if p.start == j && p.end == j {
                    p.start = End::Closed;
                    p.end = End::Closed;
                    changed = true;
                }
                continue;
            }
            let (ia, ib) = (incident[0], incident[1]);
            let b = paths.remove(ib);
            let a = paths.remove(ia);
            let a = if a.end == j { a } else { a.reversed() };
            let b = if b.start == j { b } else { b.reversed() };
            let mut pts = a.pts;
            pts.extend_from_slice(&b.pts[1..]);
            let (start, end) = if a.start == b.end && a.start == End::Tip {
                (End::Tip, End::Tip)
            } else {
                (a.start, b.end)
            };
            paths.push(Path {
                pts,
                start,
                end,
                len_px: a.len_px + b.len_px,
            });
            changed = true;
        }
        if !changed {
            return paths;
        }
    }
}

/// Orders a traced polyline: open paths start from the end that comes first
/// in row-major order, closed loops from their row-major-first point.
fn orient(mut pts: Vec<Point>) -> Vec<Point> {
    let closed = pts.len() > 2 && pts.first() == pts.last();
    if closed {
        pts.pop();
        let first = (0..pts.len())
            .min_by(|&a, &b| row_major(&pts[a], &pts[b]))
            .unwrap_or(0);
        pts.rotate_left(first);
        let head = pts[0];
        pts.push(head);
        pts
    } else {
        if row_major(pts.last().unwrap(), &pts[0]) == Ordering::Less {
            pts.reverse();
        }
        pts
    }
}

/// Traces a skeleton into pixel-space polylines (pixel centers), oriented and
/// sorted by starting point in row-major order. No simplification.
pub fn trace_paths(skeleton: &Mask, opts: &TraceOptions) -> Vec<Vec<Point>> {
    let graph = Graph::new(skeleton);
    let paths = graph.trace();
    let clusters = graph.centroids.len();
    let mut out: Vec<Vec<Point>> = prune_and_join(paths, opts.min_spur_px, clusters)
        .into_iter()
        .filter(|p| p.pts.len() >= opts.min_stroke_px.max(1))
        .map(|p| {
            let mut pts = p.pts;
            pts.dedup();
            orient(pts)
        })
        .collect();
    out.sort_by(|a, b| row_major(&a[0], &b[0]).then(a.len().cmp(&b.len())));
    out
}

fn pixel_of(p: Point) -> (i64, i64) {
    (p.x.floor() as i64, p.y.floor() as i64)
}

/// Distance travelled from `from` along unit `dir` before leaving `ink`.
fn run_inside(ink: &Mask, from: Point, dir: (f64, f64)) -> f64 {
    const STEP: f64 = 0.25;
    let mut t = 0.0;
    loop {
        let next = Point::new(from.x + (t + STEP) * dir.0, from.y + (t + STEP) * dir.1);
        let (x, y) = pixel_of(next);
        if !ink.get(x, y) || t > 1e4 {
            return t;
        }
        t += STEP;
    }
}

/// New position for the free end `pts[0]`, or `None` when it should stay.
fn restored_tip(pts: &[Point], ink: &Mask) -> Option<Point> {
    let tip = pts[0];
    let back = pts
        .iter()
        .find(|q| q.distance(&tip) >= 5.0)
        .or(pts.last())
        .copied()?;
    let len = back.distance(&tip);
    if len < 1.0 {
        return None;
    }
    let d = ((tip.x - back.x) / len, (tip.y - back.y) / len);
    let ahead = run_inside(ink, tip, d);
    let half_width = (run_inside(ink, tip, (-d.1, d.0)) + run_inside(ink, tip, (d.1, -d.0))) / 2.0;
    let shift = ahead - half_width;
    (shift > 0.5).then(|| Point::new(tip.x + shift * d.0, tip.y + shift * d.1))
}

/// Thinning pulls free stroke ends back by about the stroke half-width.
/// Pushes every free end of `paths` forward along its end direction to
/// where the ink ends, minus the local half-width, then re-orients.
pub fn restore_tips(paths: &mut [Vec<Point>], skeleton: &Mask, ink: &Mask) {
    let free = |p: Point| {
        let (x, y) = pixel_of(p);
        let n = RING.map(|(dx, dy)| skeleton.get(x + dx, y + dy));
        skeleton.get(x, y) && is_tip(&n)
    };
    for pts in paths.iter_mut() {
        if pts.len() < 2 || pts.first() == pts.last() {
            continue;
        }
        for _ in 0..2 {
            if free(pts[0]) {
                if let Some(p) = restored_tip(pts, ink) {
                    pts.insert(0, p);
                }
            }
            pts.reverse();
        }
        let oriented = orient(std::mem::take(pts));
        *pts = oriented;
    }
}

/// Traces a skeleton into strokes in the target frame of `px_to_mm`.
pub fn trace_strokes(
    skeleton: &Mask,
    px_to_mm: &Homography,
    channel: PlayerChannel,
    opts: &TraceOptions,
) -> Result<Vec<Stroke>, VisionError> {
    trace_paths(skeleton, opts)
        .into_iter()
        .map(|pts| {
            let simplified = rdp_simplify(&pts, opts.rdp_epsilon_px);
            let mapped = simplified
                .into_iter()
                .map(|p| px_to_mm.map_point(p))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Stroke::merged(channel, mapped))
        })
        .collect()
}
