//! Finite-difference verification of the hand-written backward pass.
//!
//! Numeric derivatives come from the fourth-order central stencil
//! `(-L(p+2h) + 8L(p+h) - 8L(p-h) + L(p-2h)) / 12h`, always evaluated in
//! f64 at the (possibly f32) parameter values, so the reference is accurate
//! to well below the tolerances it is used to check.

use crate::par::Execution;
use crate::stroke::Stroke5Row;

use super::{batch_gradient, evaluate, ModelParams, Real, SketcherError};

pub const GRAD_CHECK_H: f64 = 1e-4;

/// Gradients smaller than this are compared in absolute rather than
/// relative terms.
pub const GRAD_CHECK_FLOOR: f64 = 1e-3;

/// `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
    (analytic - numeric).abs() / scale
}

fn loss_at(params: &ModelParams<f64>, batch: &[&[Stroke5Row]]) -> Result<f64, SketcherError> {
    Ok(evaluate(params, batch, Execution::Sequential)?.unwrap_or(0.0))
}

/// Largest relative error between the analytic gradient and finite
/// differences, over every parameter.
pub fn grad_check<T: Real>(
    params: &ModelParams<T>,
    batch: &[&[Stroke5Row]],
) -> Result<f64, SketcherError> {
    let (_, analytic) = batch_gradient(params, batch, Execution::Parallel)?;
    grad_check_with(params, batch, &analytic)
}

/// Compares a supplied gradient against finite differences of the loss at
/// `params`.
pub fn grad_check_with<T: Real>(
    params: &ModelParams<T>,
    batch: &[&[Stroke5Row]],
    analytic: &ModelParams<T>,
) -> Result<f64, SketcherError> {
    let base = params.cast::<f64>();
    let h = GRAD_CHECK_H;
    let indices: Vec<usize> = (0..base.param_count()).collect();
    let errors = crate::par::map_collect(Execution::Parallel, &indices, |&k| {
        let mut p = base.clone();
        let x = p.flat(k);
        let mut at = |offset: f64| {
            *p.flat_mut(k) = x + offset;
            loss_at(&p, batch)
        };
        let numeric = (-at(2.0 * h)? + 8.0 * at(h)? - 8.0 * at(-h)? + at(-2.0 * h)?) / (12.0 * h);
        Ok::<f64, SketcherError>(relative_error(analytic.flat(k).as_f64(), numeric))
    });
    let mut worst = 0.0f64;
    for e in errors {
        worst = worst.max(e?);
    }
    Ok(worst)
}
