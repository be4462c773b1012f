use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::session::CompletionPolicy;
use crate::stroke::{from_stroke5, scale_offsets, Pen, PlayerChannel, Point, Sketch, Stroke5Row};

use super::real::log_softmax;
use super::{forward_step, init_state, MixtureParams, ModelParams, Real, SketcherError};

/// Assumed rows per stroke when the prefix has no complete stroke.
pub const DEFAULT_STROKE_ROWS: usize = 10;

/// Generated continuation in model units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    /// New rows only, closed by one end token.
    pub rows: Vec<Stroke5Row>,
    pub temperature: f64,
    pub policy_used: Option<CompletionPolicy>,
    pub seed: u64,
    /// Strokes requested.
    pub amount: usize,
    /// Set when generation stopped at the row cap before `amount` strokes.
    pub capped: bool,
    /// Set for unconditional generation: the first stroke begins at the
    /// anchor point itself rather than one offset away from it.
    pub starts_at_anchor: bool,
}

impl Suggestion {
    /// Decodes into canvas strokes, multiplying offsets by `scale` and
    /// starting from `anchor`.
    pub fn decode(
        &self,
        anchor: Point,
        scale: f64,
        channel: PlayerChannel,
        canvas_size: (f64, f64),
    ) -> Sketch {
        let mut rows = Vec::with_capacity(self.rows.len() + 1);
        if self.starts_at_anchor {
            rows.push(Stroke5Row::START);
        }
        rows.extend(scale_offsets(&self.rows, scale));
        from_stroke5(&rows, anchor, channel, canvas_size).sketch
    }

    pub fn stroke_count(&self) -> usize {
        self.rows.iter().filter(|r| r.pen == Pen::Up).count()
    }
}

fn pick(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the total: take the last reachable index
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn sample_row<T: Real, R: Rng + ?Sized>(
    mix: &MixtureParams<T>,
    temperature: f64,
    rng: &mut R,
    allow_end: bool,
) -> Result<Stroke5Row, SketcherError> {
    if !temperature.is_finite() || temperature < 0.0 {
        return Err(SketcherError::InvalidInput(format!(
            "temperature must be finite and >= 0, got {temperature}"
        )));
    }
    mix.validate()?;
    let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
    let log_w = f(&mix.log_weights);
    let mut pen_logits = f(&mix.pen_logits);
    if !allow_end {
        pen_logits.truncate(2);
    }
    if temperature == 0.0 {
        let i = argmax(&log_w);
        let pen = Pen::from_index(argmax(&pen_logits));
        return Ok(Stroke5Row::new(
            mix.mu_x[i].as_f64(),
            mix.mu_y[i].as_f64(),
            pen,
        ));
    }
    let tempered = |v: &[f64]| -> Vec<f64> {
        let scaled: Vec<f64> = v.iter().map(|x| x / temperature).collect();
        log_softmax(&scaled).into_iter().map(f64::exp).collect()
    };
    let i = pick(&tempered(&log_w), rng.random::<f64>());
    let s = temperature.sqrt();
    let (mx, my) = (mix.mu_x[i].as_f64(), mix.mu_y[i].as_f64());
    let (sx, sy, r) = (
        mix.sigma_x[i].as_f64() * s,
        mix.sigma_y[i].as_f64() * s,
        mix.rho[i].as_f64(),
    );
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let dx = mx + sx * z1;
    let dy = my + sy * (r * z1 + (1.0 - r * r).sqrt() * z2);
    let pen = Pen::from_index(pick(&tempered(&pen_logits), rng.random::<f64>()));
    Ok(Stroke5Row::new(dx, dy, pen))
}

/// Draws the next row.
///
/// For `temperature > 0` the component is drawn from `softmax(log pi / t)`,
/// the offset from that component's Gaussian with variances multiplied by
/// `t`, and the pen state from `softmax(logits / t)`. At `t = 0` the result
/// is the mean of the most likely component with the most likely pen state,
/// ties going to the lowest index.
pub fn sample_next<T: Real, R: Rng + ?Sized>(
    mix: &MixtureParams<T>,
    temperature: f64,
    rng: &mut R,
) -> Result<Stroke5Row, SketcherError> {
    sample_row(mix, temperature, rng, true)
}

/// Rows in the prefix divided by its number of strokes.
fn mean_stroke_rows(prefix: &[Stroke5Row]) -> f64 {
    let strokes = prefix.iter().filter(|r| r.pen == Pen::Up).count();
    if strokes == 0 {
        return DEFAULT_STROKE_ROWS as f64;
    }
    prefix.iter().filter(|r| r.pen != Pen::End).count() as f64 / strokes as f64
}

/// Continues `prefix` (model units) with `amount` new strokes.
///
/// The end token is never sampled here: generation stops after `amount`
/// pen-up rows, or at `10 * amount * mean stroke rows` rows, in which case
/// the last row is turned into a pen-up and `capped` is set. An empty prefix
/// conditions on the start token alone.
pub fn complete<T: Real>(
    params: &ModelParams<T>,
    prefix: &[Stroke5Row],
    amount: usize,
    temperature: f64,
    seed: u64,
) -> Result<Suggestion, SketcherError> {
    if amount == 0 {
        return Err(SketcherError::InvalidInput(
            "amount must be at least 1".into(),
        ));
    }
    if !temperature.is_finite() || temperature < 0.0 {
        return Err(SketcherError::InvalidInput(format!(
            "temperature must be finite and >= 0, got {temperature}"
        )));
    }
    let end = prefix
        .iter()
        .position(|r| r.pen == Pen::End)
        .unwrap_or(prefix.len());
    if prefix[end..].iter().any(|r| r.pen != Pen::End) {
        return Err(SketcherError::InvalidInput(
            "rows follow an end token in the prefix".into(),
        ));
    }
    let mut context: Vec<Stroke5Row> = prefix[..end].to_vec();
    let starts_at_anchor = context.is_empty();
    if starts_at_anchor {
        context.push(Stroke5Row::START);
    }
    let cap = ((10 * amount) as f64 * mean_stroke_rows(&context))
        .ceil()
        .max(1.0) as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = init_state(params);
    let mut mix = None;
    for row in &context {
        let (next, m) = forward_step(params, &state, row)?;
        state = next;
        mix = Some(m);
    }
    let mut mix = mix.expect("context is never empty");
    let mut rows = Vec::new();
    let mut done = 0;
    let mut capped = false;
    loop {
        let row = sample_row(&mix, temperature, &mut rng, false)?;
        rows.push(row);
        if row.pen == Pen::Up {
            done += 1;
            if done == amount {
                break;
            }
        }
        if rows.len() >= cap {
            capped = true;
            if let Some(last) = rows.last_mut() {
                last.pen = Pen::Up;
            }
            break;
        }
        let (next, m) = forward_step(params, &state, &row)?;
        state = next;
        mix = m;
    }
    rows.push(Stroke5Row::END);
    Ok(Suggestion {
        rows,
        temperature,
        policy_used: None,
        seed,
        amount,
        capped,
        starts_at_anchor,
    })
}
