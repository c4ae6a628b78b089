//! Exact rationals and the small ring abstraction shared by the exact,
//! numeric and symbolic evaluation layers.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational scalar.
pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Exact conversion of a finite double (every finite double is a dyadic rational).
pub fn from_f64(x: f64) -> Option<Q> {
    Q::from_float(x)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {0:?}")]
pub struct RationalParseError(pub String);

/// Parses `"p"`, `"-p"` or `"p/q"`.
pub fn parse_rational(text: &str) -> Result<Q, RationalParseError> {
    let err = || RationalParseError(text.to_string());
    let t = text.trim();
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (t, "1"),
    };
    let n: BigInt = num.parse().map_err(|_| err())?;
    let d: BigInt = den.parse().map_err(|_| err())?;
    if d.is_zero() {
        return Err(err());
    }
    Ok(Q::new(n, d))
}

/// Formats as `"p"` or `"p/q"`, the inverse of [`parse_rational`].
pub fn format_rational(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Wrapper that prints a rational the way [`format_rational`] does.
pub struct Rat<'a>(pub &'a Q);

impl fmt::Display for Rat<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(self.0))
    }
}

/// Coefficient ring for algebra elements.
///
/// Structure constants are always exact rationals; `scale` multiplies a ring
/// value by one of them. Implemented for `Q` (exact layer), `f64` (numeric
/// layer) and polynomials (symbolic lifting).
pub trait Ring:
    Clone
    + PartialEq
    + fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn scale(&self, c: &Q) -> Self;
    fn from_rational(c: &Q) -> Self;
}

impl Ring for Q {
    fn scale(&self, c: &Q) -> Self {
        self * c
    }
    fn from_rational(c: &Q) -> Self {
        c.clone()
    }
}

impl Ring for f64 {
    fn scale(&self, c: &Q) -> Self {
        self * to_f64(c)
    }
    fn from_rational(c: &Q) -> Self {
        to_f64(c)
    }
}

pub fn abs_q(x: &Q) -> Q {
    x.abs()
}

pub fn is_one(x: &Q) -> bool {
    x.is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_text_roundtrip() {
        for s in ["0", "3", "-7", "1/72", "-5/3"] {
            let x = parse_rational(s).unwrap();
            assert_eq!(format_rational(&x), s);
        }
        assert_eq!(parse_rational("2/4").unwrap(), qr(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn exact_float_conversion() {
        assert_eq!(from_f64(0.375).unwrap(), qr(3, 8));
        assert!(from_f64(f64::NAN).is_none());
    }
}
