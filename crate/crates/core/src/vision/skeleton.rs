//! Zhang-Suen thinning followed by removal of redundant staircase pixels.
//!
//! Classic Zhang-Suen eats anti-diagonal strokes from both ends, so
//! [`skeletonize`] uses the Lü-Wang variant, which only deletes pixels with
//! at least three neighbors.
//!
//! Zhang-Suen leaves 2-pixel "staircase" corners where a curve turns, so a
//! pixel can be 8-adjacent to both ends of an L. A second pass deletes every
//! simple non-endpoint pixel, which leaves a skeleton where each curve pixel
//! has exactly two neighbors. The pass is topology preserving because only
//! simple pixels are removed.

use super::Mask;

/// Neighbor offsets in ring order: N, NE, E, SE, S, SW, W, NW.
pub(crate) const RING: [(i64, i64); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

fn ring(mask: &Mask, x: i64, y: i64) -> [bool; 8] {
    RING.map(|(dx, dy)| mask.get(x + dx, y + dy))
}

/// Number of 0 -> 1 transitions around the ring.
fn transitions(n: &[bool; 8]) -> usize {
    (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count()
}

fn zhang_suen_pass(mask: &mut Mask, first: bool, min_neighbors: usize) -> bool {
    let mut doomed = Vec::new();
    for (x, y) in mask.iter_set() {
        let n = ring(mask, x as i64, y as i64);
        let b = n.iter().filter(|v| **v).count();
        if !(min_neighbors..=6).contains(&b) || transitions(&n) != 1 {
            continue;
        }
        // P2 = N, P4 = E, P6 = S, P8 = W
        let (p2, p4, p6, p8) = (n[0], n[2], n[4], n[6]);
        let keep = if first {
            (p2 && p4 && p6) || (p4 && p6 && p8)
        } else {
            (p2 && p4 && p8) || (p2 && p6 && p8)
        };
        if !keep {
            doomed.push((x, y));
        }
    }
    for &(x, y) in &doomed {
        mask.set(x, y, false);
    }
    !doomed.is_empty()
}

fn thin(mask: &Mask, min_neighbors: usize) -> Mask {
    let mut m = mask.clone();
    loop {
        let a = zhang_suen_pass(&mut m, true, min_neighbors);
        let b = zhang_suen_pass(&mut m, false, min_neighbors);
        if !a && !b {
            return m;
        }
    }
}

/// Classic two-subiteration Zhang-Suen thinning.
pub fn zhang_suen(mask: &Mask) -> Mask {
    thin(mask, 2)
}

/// A pixel is simple when deleting it changes neither the 8-connected
/// foreground nor the 4-connected background locally.
pub(crate) fn is_simple(n: &[bool; 8]) -> bool {
    // foreground components among the neighbors, 8-adjacency
    let mut parent: [usize; 8] = [0, 1, 2, 3, 4, 5, 6, 7];
    fn find(p: &mut [usize; 8], i: usize) -> usize {
        let mut i = i;
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let union = |a: usize, b: usize, p: &mut [usize; 8]| {
        let (ra, rb) = (find(p, a), find(p, b));
        p[ra] = rb;
    };
    for i in 0..8 {
        let j = (i + 1) % 8;
        if n[i] && n[j] {
            union(i, j, &mut parent);
        }
        // two edge neighbors at a right angle touch diagonally
        if i % 2 == 0 {
            let k = (i + 2) % 8;
            if n[i] && n[k] {
                union(i, k, &mut parent);
            }
        }
    }
    let mut roots: Vec<usize> = (0..8)
        .filter(|&i| n[i])
        .map(|i| find(&mut parent, i))
        .collect();
    roots.sort_unstable();
    roots.dedup();
    if roots.len() != 1 {
        return false;
    }
    // background runs around the ring that touch an edge neighbor of p
    let Some(start) = (0..8).find(|&i| n[i]) else {
        return false;
    };
    let mut runs = 0;
    let mut in_run = false;
    let mut run_has_edge = false;
    for step in 1..=8 {
        let i = (start + step) % 8;
        if !n[i] {
            if !in_run {
                in_run = true;
                run_has_edge = false;
            }
            run_has_edge |= i % 2 == 0;
        } else if in_run {
            in_run = false;
            if run_has_edge {
                runs += 1;
            }
        }
    }
    runs == 1
}

/// A pixel whose only neighbors are two ring-adjacent pixels sits at the
/// end of a curve, not in a staircase.
pub(crate) fn is_tip(n: &[bool; 8]) -> bool {
    let b = n.iter().filter(|v| **v).count();
    b <= 1 || (b == 2 && (0..8).any(|i| n[i] && n[(i + 1) % 8]))
}

/// Deletes simple pixels that are not curve tips until none remain.
fn remove_staircases(mask: &mut Mask) {
    loop {
        let mut changed = false;
        let pixels: Vec<(u32, u32)> = mask.iter_set().collect();
        for (x, y) in pixels {
            let n = ring(mask, x as i64, y as i64);
            if !is_tip(&n) && is_simple(&n) {
                mask.set(x, y, false);
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

/// Thins a binary mask to an 8-connected, one-pixel-wide skeleton.
pub fn skeletonize(mask: &Mask) -> Mask {
    let mut m = thin(mask, 3);
    remove_staircases(&mut m);
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosetta_sample() {
        let input = Mask::from_rows(&[
            "00000000000000000000000000000000",
            "01111111110000000111111110000000",
            "01110001111000001111001111000000",
            "01110000111000001110000111000000",
            "01110001111000001110000000000000",
            "01111111110000001110000000000000",
            "01110111100000001110000111000000",
            "01110011110011101111001111011100",
            "01110001111011100111111110011100",
            "00000000000000000000000000000000",
        ]);
        let expected = Mask::from_rows(&[
            "00000000000000000000000000000000",
            "00111111100000000011111100000000",
            "00100000100000000110000000000000",
            "00100000010000000100000000000000",
            "00100000100000000100000000000000",
            "00111110100000000100000000000000",
            "00000001100000000100000000000000",
            "00000000100001000110000110001000",
            "00000000010000000001111000000000",
            "00000000000000000000000000000000",
        ]);
        assert_eq!(zhang_suen(&input).to_rows(), expected.to_rows());
    }

    #[test]
    fn thin_line_unchanged() {
        let m = Mask::from_rows(&["00000000", "01111110", "00000000"]);
        assert_eq!(skeletonize(&m), m);
        let diag = Mask::from_rows(&["10000", "01000", "00100", "00010"]);
        assert_eq!(skeletonize(&diag), diag);
    }

    #[test]
    fn thick_bar_becomes_centerline() {
        let m = Mask::from_rows(&[
            "000000000000",
            "011111111110",
            "011111111110",
            "011111111110",
            "000000000000",
        ]);
        let s = skeletonize(&m);
        let pts: Vec<(u32, u32)> = s.iter_set().collect();
        assert!(pts.iter().all(|p| p.1 == 2), "{:?}", s.to_rows());
        let xs: Vec<u32> = pts.iter().map(|p| p.0).collect();
        assert!(*xs.first().unwrap() <= 3 && *xs.last().unwrap() >= 8);
    }

    #[test]
    fn empty_stays_empty() {
        assert!(skeletonize(&Mask::new(5, 5)).is_empty());
    }

    #[test]
    fn staircase_corner_removed() {
        let m = Mask::from_rows(&["1000", "1000", "1110"]);
        let s = skeletonize(&m);
        assert_eq!(s.to_rows(), vec!["1000", "1000", "0110"]);
    }

    #[test]
    fn simple_point_cases() {
        // straight line middle: two separate neighbors
        let mut n = [false; 8];
        n[2] = true;
        n[6] = true;
        assert!(!is_simple(&n));
        // L corner: N and E
        let mut n = [false; 8];
        n[0] = true;
        n[2] = true;
        assert!(is_simple(&n));
        // plus center: removing it opens a hole
        let mut n = [false; 8];
        for i in [0, 2, 4, 6] {
            n[i] = true;
        }
        assert!(!is_simple(&n));
    }
}
