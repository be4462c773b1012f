use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Real, SketcherError};

/// Width of a stroke-5 input row.
pub(crate) const INPUT: usize = 5;

/// LSTM and output projection weights, stored row-major.
///
/// Gate rows are stacked in the order input, forget, cell candidate, output,
/// each block `hidden` rows tall. The output projection produces `6M + 3`
/// values laid out as blocks of `M`: mixture logits, mu_x, mu_y, log sigma_x,
/// log sigma_y, raw correlation; then the three pen logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub hidden: usize,
    pub mixtures: usize,
    /// `4H x 5`
    pub w_input: Vec<T>,
    /// `4H x H`
    pub w_hidden: Vec<T>,
    /// `4H`
    pub b_gates: Vec<T>,
    /// `(6M + 3) x H`
    pub w_out: Vec<T>,
    /// `6M + 3`
    pub b_out: Vec<T>,
}

pub(crate) const TENSOR_NAMES: [&str; 5] = ["w_input", "w_hidden", "b_gates", "w_out", "b_out"];

impl<T: Real> ModelParams<T> {
    pub fn zeros(hidden: usize, mixtures: usize) -> Self {
        let out = 6 * mixtures + 3;
        Self {
            hidden,
            mixtures,
            w_input: vec![T::zero(); 4 * hidden * INPUT],
            w_hidden: vec![T::zero(); 4 * hidden * hidden],
            b_gates: vec![T::zero(); 4 * hidden],
            w_out: vec![T::zero(); out * hidden],
            b_out: vec![T::zero(); out],
        }
    }

    /// Uniform `(-1/sqrt(H), 1/sqrt(H))` weights, zero output bias, forget
    /// gate bias shifted by +1.
    pub fn init(hidden: usize, mixtures: usize, seed: u64) -> Self {
        let mut p = Self::zeros(hidden, mixtures);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = 1.0 / (hidden as f64).sqrt();
        let mut fill = |v: &mut Vec<T>| {
            for x in v.iter_mut() {
                *x = T::lit(rng.random_range(-a..a));
            }
        };
        fill(&mut p.w_input);
        fill(&mut p.w_hidden);
        fill(&mut p.b_gates);
        fill(&mut p.w_out);
        for b in &mut p.b_gates[hidden..2 * hidden] {
            *b += T::one();
        }
        p
    }

    pub fn output_size(&self) -> usize {
        6 * self.mixtures + 3
    }

    pub fn shapes(&self) -> [[usize; 2]; 5] {
        let (h, o) = (self.hidden, self.output_size());
        [[4 * h, INPUT], [4 * h, h], [4 * h, 1], [o, h], [o, 1]]
    }

    pub fn tensors(&self) -> [&[T]; 5] {
        [
            &self.w_input,
            &self.w_hidden,
            &self.b_gates,
            &self.w_out,
            &self.b_out,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<T>; 5] {
        [
            &mut self.w_input,
            &mut self.w_hidden,
            &mut self.b_gates,
            &mut self.w_out,
            &mut self.b_out,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Mutable access by flat index across all tensors in declared order.
    pub fn flat_mut(&mut self, mut index: usize) -> &mut T {
        for t in self.tensors_mut() {
            if index < t.len() {
                return &mut t[index];
            }
            index -= t.len();
        }
        panic!("parameter index out of range")
    }

    pub fn flat(&self, mut index: usize) -> T {
        for t in self.tensors() {
            if index < t.len() {
                return t[index];
            }
            index -= t.len();
        }
        panic!("parameter index out of range")
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let c = |v: &[T]| v.iter().map(|x| U::lit(x.as_f64())).collect();
        ModelParams {
            hidden: self.hidden,
            mixtures: self.mixtures,
            w_input: c(&self.w_input),
            w_hidden: c(&self.w_hidden),
            b_gates: c(&self.b_gates),
            w_out: c(&self.w_out),
            b_out: c(&self.b_out),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden, self.mixtures)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, k: T) {
        for t in self.tensors_mut() {
            for x in t.iter_mut() {
                *x *= k;
            }
        }
    }

    /// Euclidean norm over every parameter, accumulated in f64.
    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| x.as_f64() * x.as_f64())
            .sum::<f64>()
            .sqrt()
    }

    pub fn check_shapes(&self) -> Result<(), SketcherError> {
        for ((name, t), [r, c]) in TENSOR_NAMES.iter().zip(self.tensors()).zip(self.shapes()) {
            if t.len() != r * c {
                return Err(SketcherError::InvalidInput(format!(
                    "{name} has {} values, expected {r} x {c}",
                    t.len()
                )));
            }
        }
        Ok(())
    }
}
