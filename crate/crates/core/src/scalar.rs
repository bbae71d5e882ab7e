//! Scalar abstractions shared by the numerical modules.
//!
//! [`Real`] covers the floating-point types (`f32`, `f64`). [`Scalar`] is the
//! wider family used by exact tables: it adds `BigRational` so coefficient
//! recursions can be carried out without rounding and converted at the edge.

use std::fmt::{Debug, Display};
use std::iter::Sum;

#[cfg(test)]
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, NumCast, One, ToPrimitive, Zero};

/// Floating point: f32 or f64.
pub trait Real:
    Float + FromPrimitive + NumCast + Debug + Display + Default + Sum + Send + Sync + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Field elements a coefficient table can be expressed in.
pub trait Scalar: Clone + Debug + PartialEq + Zero + One + Send + Sync {
    fn from_rational(r: &BigRational) -> Self;
    fn as_f64(&self) -> f64;
    fn to_json(&self) -> serde_json::Value;
}

impl Scalar for f64 {
    fn from_rational(r: &BigRational) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }
    fn as_f64(&self) -> f64 {
        *self
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::json!(*self)
    }
}

impl Scalar for f32 {
    fn from_rational(r: &BigRational) -> Self {
        r.to_f32().unwrap_or(f32::NAN)
    }
    fn as_f64(&self) -> f64 {
        *self as f64
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::json!(*self as f64)
    }
}

impl Scalar for BigRational {
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn to_json(&self) -> serde_json::Value {
        if self.denom().is_one() {
            serde_json::Value::String(self.numer().to_string())
        } else {
            serde_json::Value::String(format!("{}/{}", self.numer(), self.denom()))
        }
    }
}

#[cfg(test)]
pub(crate) fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Largest integer strictly smaller than `x` (so `strict_floor(2.0) == 1`).
pub fn strict_floor<T: Real>(x: T) -> i64 {
    <i64 as NumCast>::from(x.ceil()).expect("finite input") - 1
}

/// Smallest integer strictly greater than `x` (so `strict_ceil(2.0) == 3`).
pub fn strict_ceil<T: Real>(x: T) -> i64 {
    <i64 as NumCast>::from(x.floor()).expect("finite input") + 1
}
