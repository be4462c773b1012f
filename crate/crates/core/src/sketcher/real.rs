use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the network can run in. Implemented for `f32` and
/// `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Default + Send + Sync + 'static
{
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to any Real")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Default
        + Send
        + Sync
        + 'static
{
}

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable `log(sum(exp(v)))`.
pub(crate) fn log_sum_exp<T: Real>(v: &[T]) -> T {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    max + v.iter().map(|x| (*x - max).exp()).sum::<T>().ln()
}

pub(crate) fn log_softmax<T: Real>(v: &[T]) -> Vec<T> {
    let lse = log_sum_exp(v);
    v.iter().map(|x| *x - lse).collect()
}

pub(crate) fn softmax<T: Real>(v: &[T]) -> Vec<T> {
    log_softmax(v).into_iter().map(T::exp).collect()
}
