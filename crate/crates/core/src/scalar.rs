//! Floating point abstraction shared by every numerical routine in the crate.

use num_traits::{Float, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Real scalar the library computes with: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal. Panics only for non-representable values, which
    /// cannot happen for the finite constants used here.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 literal")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn tau() -> Self {
        Self::lit(std::f64::consts::TAU)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `log(sum(exp(v)))` computed without overflow. Returns `-inf` for an empty slice.
pub fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let sum: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope<T: Scalar>(xs: &[T], ys: &[T]) -> Option<T> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = T::from_count(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx <= T::zero() {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Composite trapezoid running integral of uniformly sampled values.
/// `out[k]` is the integral from sample 0 to sample k.
pub fn cumulative_trapezoid<T: Scalar>(values: &[T], dt: T) -> Vec<T> {
    let half = T::lit(0.5) * dt;
    let mut out = Vec::with_capacity(values.len());
    let mut acc = T::zero();
    out.push(acc);
    for w in values.windows(2) {
        acc += half * (w[0] + w[1]);
        out.push(acc);
    }
    out
}
