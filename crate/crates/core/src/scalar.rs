//! Scalar abstraction shared by the chain, solver and simulator.
//!
//! Everything numeric in this crate is generic over [`Scalar`], which is
//! implemented for `f32` and `f64`. The tolerances used by validation and the
//! steady-state solver are tied to the precision of the concrete type: the
//! `f64` values are the contract values quoted throughout the docs, the `f32`
//! values are loosened to what single precision can actually deliver.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable for rates and probabilities: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Largest accepted `|row sum|` of a generator row.
    fn row_sum_tolerance() -> Self;
    /// Largest accepted `|Σλ - 1|` of an initial distribution.
    fn distribution_tolerance() -> Self;
    /// Negative stationary entries down to `-clamp_tolerance()` are rounded to zero.
    fn clamp_tolerance() -> Self;
    /// Largest accepted `max |πQ|`.
    fn residual_tolerance() -> Self;
    /// Largest accepted `|Σπ - 1|`.
    fn normalization_tolerance() -> Self;

    /// Converts an `f64` literal; every finite `f64` maps onto `f32`/`f64`.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn row_sum_tolerance() -> Self {
        1e-12
    }
    fn distribution_tolerance() -> Self {
        1e-12
    }
    fn clamp_tolerance() -> Self {
        1e-12
    }
    fn residual_tolerance() -> Self {
        1e-8
    }
    fn normalization_tolerance() -> Self {
        1e-10
    }
}

impl Scalar for f32 {
    fn row_sum_tolerance() -> Self {
        1e-5
    }
    fn distribution_tolerance() -> Self {
        1e-6
    }
    fn clamp_tolerance() -> Self {
        1e-6
    }
    fn residual_tolerance() -> Self {
        1e-4
    }
    fn normalization_tolerance() -> Self {
        1e-5
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tolerances_ordered<T: Scalar>() {
        assert!(T::row_sum_tolerance() > T::zero());
        assert!(T::residual_tolerance() > T::normalization_tolerance());
        assert!(T::clamp_tolerance() > T::epsilon());
    }

    #[test]
    fn both_precisions_have_sane_tolerances() {
        tolerances_ordered::<f32>();
        tolerances_ordered::<f64>();
    }

    #[test]
    fn literals_round_trip() {
        assert_eq!(f64::lit(0.25), 0.25);
        assert_eq!(f32::lit(0.25), 0.25f32);
        assert_eq!(f64::from_count(100), 100.0);
    }
}
