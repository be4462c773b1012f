use crate::stroke::{Pen, Stroke5Row};

use super::real::{log_softmax, log_sum_exp, softmax};
use super::{Real, SketcherError};

/// Raw log standard deviations are clamped to this magnitude.
pub(crate) const LOG_SIGMA_LIMIT: f64 = 10.0;
/// Correlations are `RHO_LIMIT * tanh(raw)`, which keeps `1 - rho^2` away
/// from zero even after `tanh` saturates.
pub(crate) const RHO_LIMIT: f64 = 1.0 - 1e-4;

/// Distribution over the next stroke-5 row.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams<T> {
    pub weights: Vec<T>,
    pub log_weights: Vec<T>,
    pub mu_x: Vec<T>,
    pub mu_y: Vec<T>,
    pub sigma_x: Vec<T>,
    pub sigma_y: Vec<T>,
    pub log_sigma_x: Vec<T>,
    pub log_sigma_y: Vec<T>,
    pub rho: Vec<T>,
    /// Logits for down, up, end.
    pub pen_logits: [T; 3],
}

/// Offset and pen parts of the negative log likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllTerms<T> {
    pub offset: T,
    pub pen: T,
    pub total: T,
}

impl<T: Real> MixtureParams<T> {
    /// Builds a mixture from explicit parameters. `weights` need not be
    /// normalized; they are renormalized here.
    pub fn new(
        weights: &[T],
        mu: &[(T, T)],
        sigma: &[(T, T)],
        rho: &[T],
        pen_logits: [T; 3],
    ) -> Result<Self, SketcherError> {
        let m = weights.len();
        if m == 0 || mu.len() != m || sigma.len() != m || rho.len() != m {
            return Err(SketcherError::InvalidInput(
                "mixture component arrays must be non-empty and of equal length".into(),
            ));
        }
        let total: T = weights.iter().copied().sum();
        let w: Vec<T> = weights.iter().map(|v| *v / total).collect();
        let mix = Self {
            log_weights: w.iter().map(|v| v.ln()).collect(),
            weights: w,
            mu_x: mu.iter().map(|p| p.0).collect(),
            mu_y: mu.iter().map(|p| p.1).collect(),
            sigma_x: sigma.iter().map(|p| p.0).collect(),
            sigma_y: sigma.iter().map(|p| p.1).collect(),
            log_sigma_x: sigma.iter().map(|p| p.0.ln()).collect(),
            log_sigma_y: sigma.iter().map(|p| p.1.ln()).collect(),
            rho: rho.to_vec(),
            pen_logits,
        };
        mix.validate()?;
        Ok(mix)
    }

    /// Applies the output links to `6M + 3` raw network outputs.
    pub fn from_raw(raw: &[T], mixtures: usize) -> Self {
        let m = mixtures;
        assert_eq!(raw.len(), 6 * m + 3, "raw output width");
        let block = |k: usize| &raw[k * m..(k + 1) * m];
        let limit = T::lit(LOG_SIGMA_LIMIT);
        let clamp = |v: &[T]| -> Vec<T> { v.iter().map(|x| x.max(-limit).min(limit)).collect() };
        let log_weights = log_softmax(block(0));
        let log_sigma_x = clamp(block(3));
        let log_sigma_y = clamp(block(4));
        let rho_limit = T::lit(RHO_LIMIT);
        Self {
            weights: log_weights.iter().map(|v| v.exp()).collect(),
            log_weights,
            mu_x: block(1).to_vec(),
            mu_y: block(2).to_vec(),
            sigma_x: log_sigma_x.iter().map(|v| v.exp()).collect(),
            sigma_y: log_sigma_y.iter().map(|v| v.exp()).collect(),
            log_sigma_x,
            log_sigma_y,
            rho: block(5).iter().map(|r| rho_limit * r.tanh()).collect(),
            pen_logits: [raw[6 * m], raw[6 * m + 1], raw[6 * m + 2]],
        }
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn pen_probabilities(&self) -> [T; 3] {
        let p = softmax(&self.pen_logits);
        [p[0], p[1], p[2]]
    }

    pub fn validate(&self) -> Result<(), SketcherError> {
        let sum: f64 = self.weights.iter().map(|w| w.as_f64()).sum();
        if (sum - 1.0).abs() > 1e-5 || self.weights.iter().any(|w| *w < T::zero()) {
            return Err(SketcherError::InvalidDistribution(format!(
                "mixture weights sum to {sum}"
            )));
        }
        for i in 0..self.components() {
            let (sx, sy, r) = (self.sigma_x[i], self.sigma_y[i], self.rho[i]);
            if !(sx > T::zero() && sy > T::zero() && sx.is_finite() && sy.is_finite()) {
                return Err(SketcherError::InvalidDistribution(format!(
                    "component {i} has sigma ({sx:?}, {sy:?})"
                )));
            }
            if r.is_nan() || r.abs() >= T::one() {
                return Err(SketcherError::InvalidDistribution(format!(
                    "component {i} has correlation {r:?}"
                )));
            }
            if !(self.mu_x[i].is_finite() && self.mu_y[i].is_finite()) {
                return Err(SketcherError::InvalidDistribution(format!(
                    "component {i} has a non-finite mean"
                )));
            }
        }
        if self
            .pen_logits
            .iter()
            .any(|q| q.is_nan() || *q == T::infinity())
        {
            return Err(SketcherError::InvalidDistribution("pen logits".into()));
        }
        Ok(())
    }

    /// Per-component log densities of the offset `(x, y)`.
    fn log_densities(&self, x: T, y: T) -> Vec<T> {
        let ln_2pi = T::lit((2.0 * std::f64::consts::PI).ln());
        let half = T::lit(0.5);
        (0..self.components())
            .map(|i| {
                let zx = (x - self.mu_x[i]) / self.sigma_x[i];
                let zy = (y - self.mu_y[i]) / self.sigma_y[i];
                let r = self.rho[i];
                let c = T::one() - r * r;
                let z = zx * zx + zy * zy - (r + r) * zx * zy;
                -ln_2pi - self.log_sigma_x[i] - self.log_sigma_y[i] - half * c.ln() - z / (c + c)
            })
            .collect()
    }

    /// Gradient of `w_offset * offset_nll + w_pen * pen_nll` with respect to
    /// the raw outputs this mixture was built from.
    pub(crate) fn raw_gradient(&self, target: &Stroke5Row, w_offset: T, w_pen: T, out: &mut [T]) {
        let m = self.components();
        if w_offset != T::zero() {
            let (x, y) = (T::lit(target.dx), T::lit(target.dy));
            let joint: Vec<T> = self
                .log_densities(x, y)
                .iter()
                .zip(&self.log_weights)
                .map(|(d, w)| *d + *w)
                .collect();
            let lse = log_sum_exp(&joint);
            let limit = T::lit(LOG_SIGMA_LIMIT);
            let rho_limit = T::lit(RHO_LIMIT);
            for i in 0..m {
                let g = (joint[i] - lse).exp() * w_offset;
                let (sx, sy, r) = (self.sigma_x[i], self.sigma_y[i], self.rho[i]);
                let zx = (x - self.mu_x[i]) / sx;
                let zy = (y - self.mu_y[i]) / sy;
                let c = T::one() - r * r;
                let z = zx * zx + zy * zy - (r + r) * zx * zy;
                out[i] += self.weights[i] * w_offset - g;
                out[m + i] += -g * (zx - r * zy) / (sx * c);
                out[2 * m + i] += -g * (zy - r * zx) / (sy * c);
                if self.log_sigma_x[i].abs() < limit {
                    out[3 * m + i] += -g * (zx * (zx - r * zy) / c - T::one());
                }
                if self.log_sigma_y[i].abs() < limit {
                    out[4 * m + i] += -g * (zy * (zy - r * zx) / c - T::one());
                }
                let d_rho = r / c + zx * zy / c - z * r / (c * c);
                let t = r / rho_limit;
                out[5 * m + i] += -g * d_rho * rho_limit * (T::one() - t * t);
            }
        }
        if w_pen != T::zero() {
            let p = softmax(&self.pen_logits);
            let k = target.pen.index();
            for j in 0..3 {
                let onehot = if j == k { T::one() } else { T::zero() };
                out[6 * m + j] += w_pen * (p[j] - onehot);
            }
        }
    }
}

/// Negative log likelihood of `target` under `mix`: mixture density of the
/// offset plus cross entropy of the pen state.
pub fn mdn_nll<T: Real>(
    mix: &MixtureParams<T>,
    target: &Stroke5Row,
) -> Result<NllTerms<T>, SketcherError> {
    mix.validate()?;
    let joint: Vec<T> = mix
        .log_densities(T::lit(target.dx), T::lit(target.dy))
        .iter()
        .zip(&mix.log_weights)
        .map(|(d, w)| *d + *w)
        .collect();
    let offset = -log_sum_exp(&joint);
    let pen = -log_softmax(&mix.pen_logits)[target.pen.index()];
    Ok(NllTerms {
        offset,
        pen,
        total: offset + pen,
    })
}

/// Offset loss is skipped on the end token, whose offset carries no meaning.
pub(crate) fn counts_offset(target: &Stroke5Row) -> bool {
    target.pen != Pen::End
}
