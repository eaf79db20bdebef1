//! Probability values: exact rationals, scaled integers and doubles.
//!
//! Every table and evaluator in this crate is generic over [`Value`]. A value
//! only means something relative to a *unit* (the value representing
//! probability one): rationals and doubles use unit `1`, while [`Fixed`]
//! stores integer numerators over a shared denominator, so a product of `n`
//! cells has unit `D^n`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num::{BigInt, BigRational, Integer, One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational number in lowest terms with a positive denominator.
pub type Rat = BigRational;

/// Absolute tolerance used for every floating-point equality.
pub const FLOAT_TOLERANCE: f64 = 1e-12;

/// Arithmetic needed by box tables and system evaluators.
pub trait Value:
    Clone
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + 'static
{
    fn zero_value() -> Self;

    /// A unitless integer, used for scaling by weights.
    fn from_int(k: i64) -> Self;

    /// Exact equality for exact types, `FLOAT_TOLERANCE` for floats.
    fn agrees(&self, other: &Self) -> bool;

    fn below_zero(&self) -> bool;

    /// Reads `self` as a probability measured against `unit`.
    fn normalize(&self, unit: &Self) -> Number;
}

impl Value for Rat {
    fn zero_value() -> Self {
        Zero::zero()
    }

    fn from_int(k: i64) -> Self {
        Rat::from_integer(BigInt::from(k))
    }

    fn agrees(&self, other: &Self) -> bool {
        self == other
    }

    fn below_zero(&self) -> bool {
        Signed::is_negative(self)
    }

    fn normalize(&self, unit: &Self) -> Number {
        Number::Exact(self / unit)
    }
}

impl Value for f64 {
    fn zero_value() -> Self {
        0.0
    }

    fn from_int(k: i64) -> Self {
        k as f64
    }

    fn agrees(&self, other: &Self) -> bool {
        (self - other).abs() <= FLOAT_TOLERANCE
    }

    fn below_zero(&self) -> bool {
        *self < -FLOAT_TOLERANCE
    }

    fn normalize(&self, unit: &Self) -> Number {
        Number::Float(self / unit)
    }
}

/// Integer numerator over an implicit denominator carried by the owner.
///
/// Arithmetic panics on `i128` overflow; constructors of fixed-point tables
/// check that `D^n` leaves enough headroom before handing these out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fixed(pub i128);

impl Add for Fixed {
    type Output = Fixed;
    fn add(self, rhs: Fixed) -> Fixed {
        Fixed(self.0.checked_add(rhs.0).expect("fixed-point overflow"))
    }
}

impl Sub for Fixed {
    type Output = Fixed;
    fn sub(self, rhs: Fixed) -> Fixed {
        Fixed(self.0.checked_sub(rhs.0).expect("fixed-point overflow"))
    }
}

impl Mul for Fixed {
    type Output = Fixed;
    fn mul(self, rhs: Fixed) -> Fixed {
        Fixed(self.0.checked_mul(rhs.0).expect("fixed-point overflow"))
    }
}

impl Value for Fixed {
    fn zero_value() -> Self {
        Fixed(0)
    }

    fn from_int(k: i64) -> Self {
        Fixed(k as i128)
    }

    fn agrees(&self, other: &Self) -> bool {
        self == other
    }

    fn below_zero(&self) -> bool {
        self.0 < 0
    }

    fn normalize(&self, unit: &Self) -> Number {
        Number::Exact(Rat::new(BigInt::from(self.0), BigInt::from(unit.0)))
    }
}

/// A probability-like quantity as reported to users: exact when the
/// computation was exact, a double otherwise.
#[derive(Clone, Debug, PartialEq)]
pub enum Number {
    Exact(Rat),
    Float(f64),
}

impl Number {
    pub fn int(k: i64) -> Number {
        Number::Exact(Rat::from_integer(BigInt::from(k)))
    }

    pub fn ratio(p: i64, q: i64) -> Number {
        Number::Exact(Rat::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(r) => rat_to_f64(r),
            Number::Float(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&Rat> {
        match self {
            Number::Exact(r) => Some(r),
            Number::Float(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Number::Exact(_))
    }

    /// `self >= other`, exact when both sides are exact.
    pub fn at_least(&self, other: &Number) -> bool {
        match (self, other) {
            (Number::Exact(a), Number::Exact(b)) => a >= b,
            _ => self.to_f64() >= other.to_f64() - FLOAT_TOLERANCE,
        }
    }

    pub fn abs(&self) -> Number {
        match self {
            Number::Exact(r) => Number::Exact(r.abs()),
            Number::Float(x) => Number::Float(x.abs()),
        }
    }

    pub fn sqrt_f64(&self) -> f64 {
        self.to_f64().sqrt()
    }

    /// Renders with 15 significant digits; exact values are rounded exactly.
    pub fn decimal(&self) -> String {
        match self {
            Number::Exact(r) => decimal_string(r, 15),
            Number::Float(x) => float_decimal_string(*x, 15),
        }
    }

    /// `p/q` for exact values, the decimal rendering otherwise.
    pub fn fraction(&self) -> String {
        match self {
            Number::Exact(r) => format_rat(r),
            Number::Float(_) => self.decimal(),
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fraction())
    }
}

macro_rules! number_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Number {
            type Output = Number;
            fn $method(self, rhs: Number) -> Number {
                match (self, rhs) {
                    (Number::Exact(a), Number::Exact(b)) => Number::Exact(a.$method(b)),
                    (a, b) => Number::Float(a.to_f64().$method(b.to_f64())),
                }
            }
        }

        impl<'a> $trait<&'a Number> for &'a Number {
            type Output = Number;
            fn $method(self, rhs: &'a Number) -> Number {
                self.clone().$method(rhs.clone())
            }
        }
    };
}

number_binop!(Add, add);
number_binop!(Sub, sub);
number_binop!(Mul, mul);
number_binop!(Div, div);

impl Neg for Number {
    type Output = Number;
    fn neg(self) -> Number {
        match self {
            Number::Exact(r) => Number::Exact(-r),
            Number::Float(x) => Number::Float(-x),
        }
    }
}

impl From<Rat> for Number {
    fn from(r: Rat) -> Number {
        Number::Exact(r)
    }
}

impl From<f64> for Number {
    fn from(x: f64) -> Number {
        Number::Float(x)
    }
}

impl Serialize for Number {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Number::Exact(r) => {
                let mut s = serializer.serialize_struct("Rat", 3)?;
                s.serialize_field("num", &r.numer().to_string())?;
                s.serialize_field("den", &r.denom().to_string())?;
                s.serialize_field("decimal", &self.decimal())?;
                s.end()
            }
            Number::Float(_) => {
                let mut s = serializer.serialize_struct("Float", 1)?;
                s.serialize_field("decimal", &self.decimal())?;
                s.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for Number {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            num: Option<String>,
            den: Option<String>,
            decimal: String,
        }
        let raw = Raw::deserialize(deserializer)?;
        match (raw.num, raw.den) {
            (Some(num), Some(den)) => {
                let num = BigInt::from_str(&num).map_err(de::Error::custom)?;
                let den = BigInt::from_str(&den).map_err(de::Error::custom)?;
                if den.is_zero() {
                    return Err(de::Error::custom("zero denominator"));
                }
                Ok(Number::Exact(Rat::new(num, den)))
            }
            _ => raw
                .decimal
                .parse::<f64>()
                .map(Number::Float)
                .map_err(de::Error::custom),
        }
    }
}

pub fn rat(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

pub fn rat_int(k: i64) -> Rat {
    Rat::from_integer(BigInt::from(k))
}

/// Parses `p/q` or a bare integer.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let bad = || Error::Parse(format!("expected a rational p/q, got {s:?}"));
    let s = s.trim();
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (s, "1"),
    };
    let p = BigInt::from_str(p).map_err(|_| bad())?;
    let q = BigInt::from_str(q).map_err(|_| bad())?;
    if q.is_zero() {
        return Err(bad());
    }
    Ok(Rat::new(p, q))
}

pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Components too large for a direct conversion; shrink both first.
        let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
        let n = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let d = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact decimal rendering with `sig` significant digits, round half away
/// from zero. Fixed notation, trailing zeros trimmed.
pub fn decimal_string(r: &Rat, sig: usize) -> String {
    if r.is_zero() {
        return "0".to_string();
    }
    let negative = Signed::is_negative(r);
    let mag = r.abs();
    let ten = BigInt::from(10);

    // Largest e with 10^e <= mag.
    let mut e: i64 = (mag.numer().bits() as i64 - mag.denom().bits() as i64) * 30103 / 100000;
    let pow10 = |k: i64| -> Rat {
        if k >= 0 {
            Rat::from_integer(num::pow(ten.clone(), k as usize))
        } else {
            Rat::new(BigInt::one(), num::pow(ten.clone(), (-k) as usize))
        }
    };
    while pow10(e) > mag {
        e -= 1;
    }
    while pow10(e + 1) <= mag {
        e += 1;
    }

    let decimals = (sig as i64 - 1 - e).max(0);
    let scaled = &mag * pow10(decimals);
    let (q, rem) = scaled.numer().div_rem(scaled.denom());
    let mut digits = if rem.clone() * 2 >= *scaled.denom() { q + 1 } else { q };
    if decimals == 0 && e + 1 > sig as i64 {
        // Integer part longer than `sig` digits: zero the tail.
        let drop = num::pow(ten.clone(), (e + 1 - sig as i64) as usize);
        let (q, rem) = digits.div_rem(&drop);
        let q = if rem * 2 >= drop { q + 1 } else { q };
        digits = q * drop;
    }

    let mut s = digits.to_string();
    if decimals > 0 {
        let decimals = decimals as usize;
        if s.len() <= decimals {
            s = format!("{}{}", "0".repeat(decimals + 1 - s.len()), s);
        }
        s.insert(s.len() - decimals, '.');
        let trimmed = s.trim_end_matches('0').trim_end_matches('.');
        s = trimmed.to_string();
    }
    if negative {
        s.insert(0, '-');
    }
    s
}

pub fn float_decimal_string(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { x.to_string() };
    }
    let e = x.abs().log10().floor() as i64;
    let decimals = (sig as i64 - 1 - e).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Least common multiple of the denominators of `values`.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rat>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions() {
        assert_eq!(parse_rat("1/8").unwrap(), rat(1, 8));
        assert_eq!(parse_rat(" 2/4 ").unwrap(), rat(1, 2));
        assert_eq!(parse_rat("3").unwrap(), rat_int(3));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("a/b").is_err());
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(decimal_string(&rat(1, 8), 15), "0.125");
        assert_eq!(decimal_string(&rat(1, 3), 15), "0.333333333333333");
        assert_eq!(decimal_string(&rat(2, 3), 15), "0.666666666666667");
        assert_eq!(decimal_string(&rat(1, 36), 15), "0.0277777777777778");
        assert_eq!(decimal_string(&rat(-7, 2), 15), "-3.5");
        assert_eq!(decimal_string(&rat_int(12), 15), "12");
        assert_eq!(decimal_string(&rat(9_999_999_999_999_999, 10_000_000_000_000_000), 15), "1");
        assert_eq!(float_decimal_string(0.5857864376269049, 15), "0.585786437626905");
    }

    #[test]
    fn fixed_normalizes_against_unit() {
        let n = Fixed(7).normalize(&Fixed(16));
        assert_eq!(n, Number::Exact(rat(7, 16)));
    }

    #[test]
    fn number_mixes_to_float() {
        let a = Number::ratio(1, 2) + Number::Float(0.25);
        assert_eq!(a, Number::Float(0.75));
        let b = Number::ratio(1, 2) * Number::ratio(2, 3);
        assert_eq!(b, Number::ratio(1, 3));
        assert!(Number::ratio(1, 3).at_least(&Number::ratio(1, 3)));
        assert!(!Number::ratio(1, 4).at_least(&Number::ratio(1, 3)));
    }
}
