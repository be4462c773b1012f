use interplay_core::calibration::{
    reprojection_rmse, solve_homography, CalibrationSet, Frame, Homography,
};
use interplay_core::stroke::{
    from_stroke5, normalize_offsets, offset_rms, rdp_simplify, to_stroke5, Pen, PlayerChannel,
    Point, Sketch, Stroke,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn polyline() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((0i32..200, 0i32..200), 1..12).prop_map(|pts| {
        let mut out: Vec<Point> = Vec::new();
        for (x, y) in pts {
            let p = Point::new(x as f64, y as f64);
            if out.last() != Some(&p) {
                out.push(p);
            }
        }
        out
    })
}

fn sketch() -> impl Strategy<Value = Sketch> {
    prop::collection::vec(polyline(), 0..6).prop_map(|strokes| {
        Sketch::new(
            (200.0, 200.0),
            strokes
                .into_iter()
                .map(|p| Stroke::new(PlayerChannel::Green, p))
                .collect(),
        )
    })
}

/// Brute-force distance from `p` to segment `a`-`b` by dense sampling.
fn sampled_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    (0..=2000)
        .map(|i| {
            let t = i as f64 / 2000.0;
            p.distance(&Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)))
        })
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn stroke5_round_trip(s in sketch()) {
        let rows = to_stroke5(&s, usize::MAX).unwrap();
        prop_assert_eq!(rows.last().unwrap().pen, Pen::End);
        prop_assert_eq!(rows.iter().filter(|r| r.pen == Pen::Up).count(), s.strokes.len());
        let origin = s.strokes.first().map(|st| st.points[0]).unwrap_or_default();
        let back = from_stroke5(&rows, origin, PlayerChannel::Green, s.canvas_size);
        prop_assert!(!back.missing_end);
        prop_assert_eq!(back.rows_used, rows.len());
        prop_assert_eq!(back.sketch, s);
    }

    #[test]
    fn normalized_offsets_have_unit_spread(s in sketch()) {
        let rows = to_stroke5(&s, usize::MAX).unwrap();
        let (scaled, scale) = normalize_offsets(&rows);
        match offset_rms(&rows) {
            Some(rms) => {
                prop_assert!((scale - rms).abs() < 1e-12);
                prop_assert!((offset_rms(&scaled).unwrap() - 1.0).abs() < 1e-9);
            }
            None => prop_assert_eq!(scaled, rows),
        }
    }

    #[test]
    fn rdp_properties(
        pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 0..30),
        epsilon in 0.0f64..20.0,
    ) {
        let line: Vec<Point> = pts.into_iter().map(|(x, y)| Point::new(x, y)).collect();
        let simple = rdp_simplify(&line, epsilon);

        // subsequence: every kept point appears in order
        let mut kept = Vec::new();
        let mut cursor = 0;
        for p in &simple {
            let at = (cursor..line.len()).find(|&i| line[i] == *p);
            prop_assert!(at.is_some());
            kept.push(at.unwrap());
            cursor = at.unwrap() + 1;
        }
        if !line.is_empty() {
            prop_assert_eq!(kept.first(), Some(&0));
            prop_assert_eq!(kept.last(), Some(&(line.len() - 1)));
        }
        for w in kept.windows(2) {
            for p in &line[w[0] + 1..w[1]] {
                let d = sampled_segment_distance(p, &line[w[0]], &line[w[1]]);
                prop_assert!(d <= epsilon + 1e-6, "{} > {}", d, epsilon);
            }
        }
    }
}

fn random_homography(rng: &mut ChaCha8Rng) -> Homography {
    Homography::new([
        rng.random_range(0.5..2.0),
        rng.random_range(-0.3..0.3),
        rng.random_range(-100.0..100.0),
        rng.random_range(-0.3..0.3),
        rng.random_range(0.5..2.0),
        rng.random_range(-100.0..100.0),
        rng.random_range(-5e-4..5e-4),
        rng.random_range(-5e-4..5e-4),
        1.0,
    ])
    .unwrap()
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.random_range(0.0..500.0), rng.random_range(0.0..500.0)))
        .collect()
}

fn exact_set(h: &Homography, src: &[Point]) -> CalibrationSet {
    CalibrationSet::new(
        Frame::Camera,
        Frame::Canvas,
        src.iter().map(|p| (*p, h.map_point(*p).unwrap())).collect(),
    )
}

#[test]
fn homography_compose_and_recover() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for case in 0..100 {
        let h = random_homography(&mut rng);
        let n = if case % 2 == 0 { 4 } else { 8 };
        let set = exact_set(&h, &random_points(&mut rng, n));
        let got = solve_homography(&set).unwrap();
        for (a, b) in got.entries().iter().zip(h.entries()) {
            assert!((a - b).abs() <= 1e-6, "case {case}: {a} vs {b}");
        }
        assert!(reprojection_rmse(&got, &set).unwrap() <= 1e-9);
    }
}

#[test]
fn inverse_map_returns_the_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let h = random_homography(&mut rng);
        let inv = h.inverse().unwrap();
        for p in random_points(&mut rng, 10) {
            let back = inv.map_point(h.map_point(p).unwrap()).unwrap();
            assert!(back.distance(&p) <= 1e-9);
        }
    }
}

#[test]
fn common_scaling_keeps_the_action_on_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = random_homography(&mut rng);
    let src = random_points(&mut rng, 10);
    let set = exact_set(&h, &src);
    let k = 37.5;
    let scaled = CalibrationSet::new(
        Frame::Camera,
        Frame::Canvas,
        set.correspondences
            .iter()
            .map(|(a, b)| (Point::new(a.x * k, a.y * k), Point::new(b.x * k, b.y * k)))
            .collect(),
    );
    let g = solve_homography(&scaled).unwrap();
    for p in random_points(&mut rng, 20) {
        let direct = h.map_point(p).unwrap();
        let via = g.map_point(Point::new(p.x * k, p.y * k)).unwrap();
        assert!(Point::new(via.x / k, via.y / k).distance(&direct) <= 1e-8);
    }
}

#[test]
fn rmse_under_noise_matches_residual_dof() {
    // noise on destinations only, sigma per coordinate; 2n equations, 8 unknowns
    let (n, sigma, trials) = (20, 1.0, 400);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut mean_sq = 0.0;
    for _ in 0..trials {
        let h = random_homography(&mut rng);
        let set = exact_set(&h, &random_points(&mut rng, n));
        let noisy = CalibrationSet::new(
            Frame::Camera,
            Frame::Canvas,
            set.correspondences
                .iter()
                .map(|(a, b)| {
                    (
                        *a,
                        Point::new(b.x + noise.sample(&mut rng), b.y + noise.sample(&mut rng)),
                    )
                })
                .collect(),
        );
        let fit = solve_homography(&noisy).unwrap();
        mean_sq += reprojection_rmse(&fit, &noisy).unwrap().powi(2) / trials as f64;
    }
    let want = 2.0 * sigma * sigma * (1.0 - 8.0 / (2.0 * n as f64));
    assert!((mean_sq - want).abs() / want < 0.1, "{mean_sq} vs {want}");
}
