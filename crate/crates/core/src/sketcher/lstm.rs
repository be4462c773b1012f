use crate::stroke::Stroke5Row;

use super::mdn::counts_offset;
use super::params::INPUT;
use super::real::sigmoid;
use super::{mdn_nll, MixtureParams, ModelParams, Real, SketcherError};

/// Hidden and cell vectors of the recurrent cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

pub fn init_state<T: Real>(params: &ModelParams<T>) -> RecurrentState<T> {
    RecurrentState {
        h: vec![T::zero(); params.hidden],
        c: vec![T::zero(); params.hidden],
    }
}

/// `out += W x` for a row-major `rows x cols` matrix.
fn matvec_add<T: Real>(w: &[T], cols: usize, x: &[T], out: &mut [T]) {
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = T::zero();
        for (a, b) in row.iter().zip(x) {
            acc += *a * *b;
        }
        *o += acc;
    }
}

/// `out += W^T v`.
fn matvec_t_add<T: Real>(w: &[T], cols: usize, v: &[T], out: &mut [T]) {
    for (r, vr) in v.iter().enumerate() {
        if *vr == T::zero() {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += *a * *vr;
        }
    }
}

/// `g += a b^T`.
fn outer_add<T: Real>(g: &mut [T], a: &[T], b: &[T]) {
    let cols = b.len();
    for (r, ar) in a.iter().enumerate() {
        if *ar == T::zero() {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (o, bc) in row.iter_mut().zip(b) {
            *o += *ar * *bc;
        }
    }
}

fn input_vector<T: Real>(row: &Stroke5Row) -> Result<[T; INPUT], SketcherError> {
    let v = row.to_array();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(SketcherError::NonFinite("input row"));
    }
    Ok(v.map(T::lit))
}

/// Everything the backward pass needs from one time step.
struct StepCache<T> {
    x: [T; INPUT],
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    i: Vec<T>,
    f: Vec<T>,
    g: Vec<T>,
    o: Vec<T>,
    tanh_c: Vec<T>,
    h: Vec<T>,
    c: Vec<T>,
    mix: MixtureParams<T>,
}

fn step<T: Real>(p: &ModelParams<T>, h_prev: &[T], c_prev: &[T], x: [T; INPUT]) -> StepCache<T> {
    let hs = p.hidden;
    let mut z = p.b_gates.clone();
    matvec_add(&p.w_input, INPUT, &x, &mut z);
    matvec_add(&p.w_hidden, hs, h_prev, &mut z);
    let i: Vec<T> = z[..hs].iter().map(|v| sigmoid(*v)).collect();
    let f: Vec<T> = z[hs..2 * hs].iter().map(|v| sigmoid(*v)).collect();
    let g: Vec<T> = z[2 * hs..3 * hs].iter().map(|v| v.tanh()).collect();
    let o: Vec<T> = z[3 * hs..].iter().map(|v| sigmoid(*v)).collect();
    let c: Vec<T> = (0..hs).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<T> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<T> = (0..hs).map(|k| o[k] * tanh_c[k]).collect();
    let mut y = p.b_out.clone();
    matvec_add(&p.w_out, hs, &h, &mut y);
    StepCache {
        x,
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        i,
        f,
        g,
        o,
        tanh_c,
        h,
        c,
        mix: MixtureParams::from_raw(&y, p.mixtures),
    }
}

/// Feeds one row and returns the next state with the distribution over the
/// following row.
pub fn forward_step<T: Real>(
    params: &ModelParams<T>,
    state: &RecurrentState<T>,
    row: &Stroke5Row,
) -> Result<(RecurrentState<T>, MixtureParams<T>), SketcherError> {
    let cache = step(params, &state.h, &state.c, input_vector(row)?);
    if cache.h.iter().chain(&cache.c).any(|v| !v.is_finite()) {
        return Err(SketcherError::NonFinite("recurrent state"));
    }
    Ok((
        RecurrentState {
            h: cache.h,
            c: cache.c,
        },
        cache.mix,
    ))
}

/// Number of predicted rows in a sequence: every row after the first.
fn target_count(rows: &[Stroke5Row]) -> usize {
    rows.len().saturating_sub(1)
}

/// Mean per-step negative log likelihood of `rows[1..]` given the rows
/// before each. Offsets of end-token targets are not scored. Sequences
/// shorter than two rows have loss 0.
pub fn sequence_loss<T: Real>(
    params: &ModelParams<T>,
    rows: &[Stroke5Row],
) -> Result<T, SketcherError> {
    let n = target_count(rows);
    if n == 0 {
        return Ok(T::zero());
    }
    let mut state = init_state(params);
    let mut total = T::zero();
    for t in 0..n {
        let (next, mix) = forward_step(params, &state, &rows[t])?;
        let nll = mdn_nll(&mix, &rows[t + 1])?;
        total += if counts_offset(&rows[t + 1]) {
            nll.total
        } else {
            nll.pen
        };
        state = next;
    }
    Ok(total / T::lit(n as f64))
}

/// Loss of one sequence and its gradient with respect to every parameter,
/// by backpropagation through time.
pub fn sequence_gradient<T: Real>(
    params: &ModelParams<T>,
    rows: &[Stroke5Row],
) -> Result<(T, ModelParams<T>), SketcherError> {
    let mut grad = params.zeros_like();
    let n = target_count(rows);
    if n == 0 {
        return Ok((T::zero(), grad));
    }
    let hs = params.hidden;
    let weight = T::one() / T::lit(n as f64);

    let mut caches = Vec::with_capacity(n);
    let mut h = vec![T::zero(); hs];
    let mut c = vec![T::zero(); hs];
    let mut total = T::zero();
    for t in 0..n {
        let cache = step(params, &h, &c, input_vector(&rows[t])?);
        let target = &rows[t + 1];
        let nll = mdn_nll(&cache.mix, target)?;
        total += if counts_offset(target) {
            nll.total
        } else {
            nll.pen
        };
        h.clone_from(&cache.h);
        c.clone_from(&cache.c);
        caches.push(cache);
    }
    let loss = total * weight;
    if !loss.is_finite() {
        return Err(SketcherError::NonFinite("sequence loss"));
    }

    let out_size = params.output_size();
    let mut dh_next = vec![T::zero(); hs];
    let mut dc_next = vec![T::zero(); hs];
    let mut dy = vec![T::zero(); out_size];
    let mut dz = vec![T::zero(); 4 * hs];
    for (t, cache) in caches.iter().enumerate().rev() {
        let target = &rows[t + 1];
        dy.iter_mut().for_each(|v| *v = T::zero());
        let w_offset = if counts_offset(target) {
            weight
        } else {
            T::zero()
        };
        cache.mix.raw_gradient(target, w_offset, weight, &mut dy);

        outer_add(&mut grad.w_out, &dy, &cache.h);
        for (b, d) in grad.b_out.iter_mut().zip(&dy) {
            *b += *d;
        }
        let mut dh = dh_next.clone();
        matvec_t_add(&params.w_out, hs, &dy, &mut dh);

        for k in 0..hs {
            let (i, f, g, o) = (cache.i[k], cache.f[k], cache.g[k], cache.o[k]);
            let tc = cache.tanh_c[k];
            let d_o = dh[k] * tc;
            let dc = dh[k] * o * (T::one() - tc * tc) + dc_next[k];
            let d_i = dc * g;
            let d_g = dc * i;
            let d_f = dc * cache.c_prev[k];
            dc_next[k] = dc * f;
            dz[k] = d_i * i * (T::one() - i);
            dz[hs + k] = d_f * f * (T::one() - f);
            dz[2 * hs + k] = d_g * (T::one() - g * g);
            dz[3 * hs + k] = d_o * o * (T::one() - o);
        }
        debug_assert_eq!(cache.c.len(), hs);
        outer_add(&mut grad.w_input, &dz, &cache.x);
        outer_add(&mut grad.w_hidden, &dz, &cache.h_prev);
        for (b, d) in grad.b_gates.iter_mut().zip(&dz) {
            *b += *d;
        }
        dh_next.iter_mut().for_each(|v| *v = T::zero());
        matvec_t_add(&params.w_hidden, hs, &dz, &mut dh_next);
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stroke::Pen;

    fn rows() -> Vec<Stroke5Row> {
        vec![
            Stroke5Row::START,
            Stroke5Row::new(1.0, 0.0, Pen::Down),
            Stroke5Row::new(0.0, 1.0, Pen::Up),
            Stroke5Row::new(-1.0, -1.0, Pen::Up),
            Stroke5Row::END,
        ]
    }

    #[test]
    fn forward_step_is_deterministic() {
        let p = ModelParams::<f32>::init(8, 3, 1);
        let s = init_state(&p);
        let row = Stroke5Row::new(0.5, -0.25, Pen::Down);
        let a = forward_step(&p, &s, &row).unwrap();
        let b = forward_step(&p, &s, &row).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_weights_give_uniform_mixture() {
        let p = ModelParams::<f64>::zeros(4, 5);
        let (_, mix) = forward_step(&p, &init_state(&p), &Stroke5Row::START).unwrap();
        assert!(mix.weights.iter().all(|w| (*w - 0.2).abs() < 1e-15));
        assert!(mix.pen_logits.iter().all(|q| *q == mix.pen_logits[0]));
    }

    #[test]
    fn non_finite_input_rejected() {
        let p = ModelParams::<f64>::zeros(2, 1);
        let row = Stroke5Row::new(f64::NAN, 0.0, Pen::Down);
        assert!(matches!(
            forward_step(&p, &init_state(&p), &row),
            Err(SketcherError::NonFinite(_))
        ));
    }

    #[test]
    fn gradient_loss_matches_forward_loss() {
        let p = ModelParams::<f64>::init(6, 2, 9);
        let (loss, _) = sequence_gradient(&p, &rows()).unwrap();
        assert!((loss - sequence_loss(&p, &rows()).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn short_sequences_have_no_gradient() {
        let p = ModelParams::<f64>::init(3, 1, 0);
        let (loss, g) = sequence_gradient(&p, &[Stroke5Row::START]).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g.norm(), 0.0);
    }
}
