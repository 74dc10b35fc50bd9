//! Scalar abstraction shared by the simplex solver and the decomposition.
//!
//! Two implementations exist: `f64` (tolerance based) and [`Rational`]
//! (exact). Every comparison that needs slack goes through the methods
//! here, so the exact mode uses literal comparisons and the float mode uses
//! the tolerance it is handed.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational arithmetic.
pub type Rational = BigRational;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True when arithmetic is exact and tolerances are ignored.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    /// Exact conversion for rationals (the binary value of the float).
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn floor(&self) -> Self;
    fn ceil(&self) -> Self;
    fn abs(&self) -> Self;

    /// `|self| <= tol` in float mode, `self == 0` in exact mode.
    fn near_zero(&self, tol: f64) -> bool;

    /// Strictly positive beyond the tolerance.
    fn is_pos(&self, tol: f64) -> bool;

    /// Strictly negative beyond the tolerance.
    fn is_neg(&self, tol: f64) -> bool {
        (-self.clone()).is_pos(tol)
    }

    /// Rounds to the nearest integer when within `tol` of it; exact mode
    /// returns the value unchanged.
    fn snap(&self, tol: f64) -> Self;

    /// Integer value, assuming `self` is integral.
    fn to_i64(&self) -> i64;

    fn is_integral(&self, tol: f64) -> bool {
        let r = self.snap(tol);
        r == r.floor()
    }

    /// Lossless text form: shortest round-trip decimal for floats, `p/q`
    /// for rationals.
    fn to_text(&self) -> String;

    /// Flushes float noise below `eps` to zero; identity in exact mode.
    fn chop(self, _eps: f64) -> Self {
        self
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn floor(&self) -> Self {
        f64::floor(*self)
    }
    fn ceil(&self) -> Self {
        f64::ceil(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn near_zero(&self, tol: f64) -> bool {
        f64::abs(*self) <= tol
    }
    fn is_pos(&self, tol: f64) -> bool {
        *self > tol
    }
    fn snap(&self, tol: f64) -> Self {
        let r = self.round();
        if (self - r).abs() <= tol {
            // avoid -0.0 leaking into output
            r + 0.0
        } else {
            *self
        }
    }
    fn to_i64(&self) -> i64 {
        self.round() as i64
    }
    fn to_text(&self) -> String {
        format!("{self}")
    }
    fn chop(self, eps: f64) -> Self {
        if f64::abs(self) < eps {
            0.0
        } else {
            self
        }
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as One>::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).expect("finite float")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn floor(&self) -> Self {
        BigRational::floor(self)
    }
    fn ceil(&self) -> Self {
        BigRational::ceil(self)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn near_zero(&self, _tol: f64) -> bool {
        self.is_zero()
    }
    fn is_pos(&self, _tol: f64) -> bool {
        self.is_positive()
    }
    fn snap(&self, _tol: f64) -> Self {
        self.clone()
    }
    fn to_i64(&self) -> i64 {
        self.to_integer().to_i64().expect("integer fits in i64")
    }
    fn to_text(&self) -> String {
        if self.is_integer() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
}

/// Parses the text form written by [`Scalar::to_text`] for rationals.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    match text.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(BigRational::new(n, d))
            }
        }
        None => {
            if let Ok(n) = text.parse::<BigInt>() {
                Some(BigRational::from_integer(n))
            } else {
                text.parse::<f64>().ok().and_then(BigRational::from_float)
            }
        }
    }
}

/// Converts a vector between scalar types via `f64` (float target) or by
/// exact conversion of the float (rational target).
pub fn convert_vec<A: Scalar, B: Scalar>(v: &[A]) -> Vec<B> {
    v.iter().map(|a| B::from_f64(a.to_f64())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_snapping() {
        assert_eq!(0.9999999999f64.snap(1e-9), 1.0);
        assert_eq!(0.5f64.snap(1e-9), 0.5);
        assert_eq!((-1e-12f64).snap(1e-9).to_bits(), 0.0f64.to_bits());
        assert!(2.0000000001f64.is_integral(1e-9));
        assert!(!2.1f64.is_integral(1e-9));
    }

    #[test]
    fn rational_text_round_trip() {
        let r = Rational::new(BigInt::from(-7), BigInt::from(3));
        assert_eq!(r.to_text(), "-7/3");
        assert_eq!(parse_rational(&r.to_text()), Some(r));
        assert_eq!(parse_rational("4"), Some(Rational::from_i64(4)));
        assert_eq!(parse_rational("0.5"), Some(Rational::from_f64(0.5)));
        assert_eq!(parse_rational("1/0"), None);
    }

    #[test]
    fn rational_floor_ceil() {
        let r = Rational::new(BigInt::from(13), BigInt::from(10));
        assert_eq!(Scalar::floor(&r), Rational::from_i64(1));
        assert_eq!(Scalar::ceil(&r), Rational::from_i64(2));
        assert!(r.is_pos(1.0));
        assert!(!<Rational as Scalar>::zero().is_pos(0.0));
    }
}
