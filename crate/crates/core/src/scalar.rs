//! Numeric abstraction for the closed-form analysis code.
//!
//! The energy, power and efficiency formulas are plain field arithmetic plus a
//! ceiling, so they are written once against [`Scalar`] and instantiated for
//! `f32`, `f64` and exact rationals.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

pub trait Scalar:
    Num + Copy + PartialOrd + Debug + Display + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Smallest integral value not less than `self`.
    fn ceil(self) -> Self;

    fn is_finite_value(self) -> bool {
        true
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("integer representable in scalar type")
    }

    /// Ceiling as a server count. Negative or non-finite values map to `None`.
    fn ceil_count(self) -> Option<usize> {
        if !self.is_finite_value() || self < Self::zero() {
            return None;
        }
        self.ceil().to_usize()
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f32 {
    fn ceil(self) -> Self {
        f32::ceil(self)
    }

    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f64 {
    fn ceil(self) -> Self {
        f64::ceil(self)
    }

    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

macro_rules! impl_scalar_ratio {
    ($($int:ty),*) => {
        $(
            impl Scalar for Ratio<$int> {
                fn ceil(self) -> Self {
                    Ratio::ceil(&self)
                }
            }
        )*
    };
}

impl_scalar_ratio!(i64, i128);
