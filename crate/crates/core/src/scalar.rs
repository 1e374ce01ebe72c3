//! Scalar abstraction for the closed-form parts of the model.
//!
//! Everything in [`crate::model`], [`crate::saturated`] (apart from the
//! samplers) and [`crate::omega`] is pure field arithmetic, so it is written
//! once over [`Scalar`] and instantiated for `f32`, `f64` and exact rationals.
//! Operations that need logarithms (odds ratios) additionally require
//! [`num_traits::Float`].

use std::fmt::Debug;

use num_rational::Rational64;
use num_traits::{Num, ToPrimitive};

/// Ordered field element usable by the bound and estimand formulas.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {
    /// Lossy conversion used for reporting and for mixing with sampled values.
    fn to_f64(self) -> f64;

    /// Conversion from a float literal. For rationals this is an exact
    /// conversion of the binary value, so prefer building rationals directly.
    fn from_f64(v: f64) -> Self;

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn clamp_unit(self) -> Self {
        self.max_of(Self::zero()).min_of(Self::one())
    }

    fn abs_diff(self, other: Self) -> Self {
        if self > other {
            self - other
        } else {
            other - self
        }
    }
}

impl Scalar for f64 {
    fn to_f64(self) -> f64 {
        self
    }
    fn from_f64(v: f64) -> Self {
        v
    }
}

impl Scalar for f32 {
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for Rational64 {
    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
    fn from_f64(v: f64) -> Self {
        <Rational64 as num_traits::FromPrimitive>::from_f64(v).expect("representable float")
    }
}

/// Convenience constructor for rational test values such as `rat(47, 100)`.
pub fn rat(numer: i64, denom: i64) -> Rational64 {
    Rational64::new(numer, denom)
}
