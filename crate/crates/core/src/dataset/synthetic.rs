//! Generated toy corpora.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::stroke::{PlayerChannel, Point, Sketch, Stroke};

use super::LabeledSketch;

/// Closed squares drawn clockwise from the top-left corner as one stroke,
/// on a 256-unit canvas, with side 40 to 200 and up to 2 units of corner
/// jitter.
pub fn square_sketches(n: usize, seed: u64) -> Vec<LabeledSketch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let side = rng.random_range(40.0..200.0);
            let x0 = rng.random_range(0.0..(250.0 - side));
            let y0 = rng.random_range(0.0..(250.0 - side));
            let mut jitter = || rng.random_range(-2.0..2.0);
            let start = Point::new(x0 + 2.0, y0 + 2.0);
            let corners = [
                start,
                Point::new(x0 + side + jitter() + 2.0, y0 + jitter() + 2.0),
                Point::new(x0 + side + jitter() + 2.0, y0 + side + jitter() + 2.0),
                Point::new(x0 + jitter() + 2.0, y0 + side + jitter() + 2.0),
                start,
            ];
            LabeledSketch {
                label: "square".into(),
                sketch: Sketch::new(
                    (256.0, 256.0),
                    vec![Stroke::new(PlayerChannel::Black, corners.to_vec())],
                ),
            }
        })
        .collect()
}
