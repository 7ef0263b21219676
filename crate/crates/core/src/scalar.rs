//! Scalar abstractions shared by every numerical kernel.
//!
//! All math in this crate is written against [`Real`] (implemented for `f32`
//! and `f64`) and, where complex arithmetic is required, against
//! [`Entry`], which is implemented for both `T` and `Complex<T>`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Matrix entry over a real scalar `T`: either `T` itself or `Complex<T>`.
pub trait Entry<T: Real>:
    Copy + PartialEq + Debug + Send + Sync + NumAssign + Neg<Output = Self> + 'static
{
    fn from_real(x: T) -> Self;
    fn modulus(self) -> T;
    fn is_finite_entry(self) -> bool;
}

impl<T: Real> Entry<T> for T {
    #[inline]
    fn from_real(x: T) -> Self {
        x
    }
    #[inline]
    fn modulus(self) -> T {
        self.abs()
    }
    #[inline]
    fn is_finite_entry(self) -> bool {
        self.is_finite()
    }
}

impl<T: Real> Entry<T> for Complex<T> {
    #[inline]
    fn from_real(x: T) -> Self {
        Complex::new(x, T::zero())
    }
    #[inline]
    fn modulus(self) -> T {
        self.norm()
    }
    #[inline]
    fn is_finite_entry(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Median of a slice of finite values; `None` when empty.
pub fn median<T: Real>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / T::lit(2.0)
    })
}

/// Composite Simpson weights for `intervals` uniform panels on `[0, 1]`.
///
/// `intervals` must be even.
pub fn simpson_weights<T: Real>(intervals: usize) -> Vec<T> {
    debug_assert!(intervals >= 2 && intervals % 2 == 0);
    let h = T::one() / T::from_usize_lossy(intervals);
    let third = h / T::lit(3.0);
    (0..=intervals)
        .map(|j| {
            let w = if j == 0 || j == intervals {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            third * T::lit(w)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0_f64, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median::<f64>(&[]), None);
    }

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let w = simpson_weights::<f64>(8);
        let integral: f64 = w
            .iter()
            .enumerate()
            .map(|(j, wj)| {
                let x = j as f64 / 8.0;
                wj * (x * x * x - 2.0 * x + 1.0)
            })
            .sum();
        assert!((integral - 0.25).abs() < 1e-15);
    }
}
