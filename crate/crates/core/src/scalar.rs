//! Scalar types used by the linear solver and helpers for the exact rational
//! carrier used everywhere else (weights, probabilities, expected times).

use std::fmt::Debug;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::Rational;

/// A field the chain solver can run over.
///
/// The exact instance is [`BigRational`]; `f64`/`f32` give a fast approximate
/// solve of the same system.
pub trait Scalar: Num + Clone + Debug + PartialEq {
    fn from_rational(value: &Rational) -> Self;

    fn from_u64(value: u64) -> Self;

    /// Pivot preference during elimination, lower is better. Rationals prefer
    /// the smallest bit size (limits coefficient growth), floats prefer the
    /// largest magnitude.
    fn pivot_cost(&self) -> u128;

    fn to_f64(&self) -> f64;
}

impl Scalar for BigRational {
    fn from_rational(value: &Rational) -> Self {
        value.clone()
    }

    fn from_u64(value: u64) -> Self {
        BigRational::from_integer(BigInt::from(value))
    }

    fn pivot_cost(&self) -> u128 {
        u128::from(self.numer().bits()) + u128::from(self.denom().bits())
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

macro_rules! impl_float_scalar {
    ($f:ty) => {
        impl Scalar for $f {
            fn from_rational(value: &Rational) -> Self {
                ToPrimitive::to_f64(value).unwrap_or(f64::NAN) as $f
            }

            fn from_u64(value: u64) -> Self {
                value as $f
            }

            fn pivot_cost(&self) -> u128 {
                // Order-preserving map of -|x| onto the unsigned integers.
                u128::from(u64::MAX - (self.abs() as f64).to_bits())
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }
        }
    };
}

impl_float_scalar!(f32);
impl_float_scalar!(f64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty number")]
    Empty,
    #[error("invalid number `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Parses `"a/b"`, an integer, or a plain decimal such as `"0.125"` into an
/// exact rational. Decimals never pass through floating point.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    let invalid = || ParseRationalError::Invalid(s.to_string());
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_integer(num.trim()).ok_or_else(invalid)?;
        let den = parse_integer(den.trim()).ok_or_else(invalid)?;
        if den.is_zero() {
            return Err(ParseRationalError::ZeroDenominator(s.to_string()));
        }
        return Ok(BigRational::new(num, den));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(invalid());
    }
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int_part) || !all_digits(frac_part) {
        return Err(invalid());
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str(if digits.is_empty() { "0" } else { &digits })
        .map_err(|_| invalid())?;
    if negative {
        numer = -numer;
    }
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    Ok(BigRational::new(numer, denom))
}

fn parse_integer(s: &str) -> Option<BigInt> {
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigInt::from_str(s).ok()
}

/// `"a/b"`, or just `"a"` for integers.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Rounds a non-negative rational to the nearest integer, ties to even.
fn round_half_even(value: &Rational) -> BigInt {
    let (q, r): (BigInt, BigInt) = value.numer().div_mod_floor(value.denom());
    let twice: BigInt = &r * 2u32;
    match twice.cmp(value.denom()) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => {
            if q.is_even() {
                q
            } else {
                q + 1
            }
        }
    }
}

/// Decimal rendering with `digits` significant digits, rounded half-to-even
/// from the exact value. Trailing fractional zeros are dropped.
pub fn format_decimal(value: &Rational, digits: u32) -> String {
    assert!(digits > 0);
    if value.is_zero() {
        return "0".to_string();
    }
    let negative = value.is_negative();
    let magnitude = value.abs();
    let ten = BigRational::from_integer(BigInt::from(10u32));

    // exponent such that 10^exp <= magnitude < 10^(exp+1)
    let mut exp: i64 = magnitude.numer().to_string().len() as i64
        - magnitude.denom().to_string().len() as i64;
    let pow10 = |e: i64| -> BigRational {
        if e >= 0 {
            num_traits::pow(ten.clone(), e as usize)
        } else {
            num_traits::pow(ten.clone(), (-e) as usize).recip()
        }
    };
    while pow10(exp) > magnitude {
        exp -= 1;
    }
    while pow10(exp + 1) <= magnitude {
        exp += 1;
    }

    let shift = i64::from(digits) - 1 - exp;
    let mut mantissa = round_half_even(&(&magnitude * pow10(shift)));
    let mut shift = shift;
    let limit = num_traits::pow(BigInt::from(10u32), digits as usize);
    if mantissa >= limit {
        mantissa /= 10;
        shift -= 1;
    }

    let mut text = mantissa.to_string();
    let body = if shift <= 0 {
        text.push_str(&"0".repeat((-shift) as usize));
        text
    } else {
        let shift = shift as usize;
        if text.len() <= shift {
            text = format!("{}{}", "0".repeat(shift - text.len() + 1), text);
        }
        let (int_part, frac_part) = text.split_at(text.len() - shift);
        let frac_part = frac_part.trim_end_matches('0');
        if frac_part.is_empty() {
            int_part.to_string()
        } else {
            format!("{int_part}.{frac_part}")
        }
    };
    let sign = if negative && body.bytes().any(|b| b != b'0' && b != b'.') {
        "-"
    } else {
        ""
    };
    format!("{sign}{body}")
}

/// True when the denominator is a power of two.
pub fn is_dyadic(value: &Rational) -> bool {
    let d = value.denom();
    d.sign() == Sign::Plus && (d & (d - BigInt::one())).is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn parses_fractions_and_decimals_exactly() {
        assert_eq!(parse_rational("1/5").unwrap(), q(1, 5));
        assert_eq!(parse_rational(" 4/20 ").unwrap(), q(1, 5));
        assert_eq!(parse_rational("0.1").unwrap(), q(1, 10));
        assert_eq!(parse_rational("12.500").unwrap(), q(25, 2));
        assert_eq!(parse_rational(".5").unwrap(), q(1, 2));
        assert_eq!(parse_rational("3").unwrap(), q(3, 1));
        assert_eq!(parse_rational("-0.25").unwrap(), q(-1, 4));
    }

    #[test]
    fn rejects_malformed_numbers() {
        assert!(matches!(parse_rational(""), Err(ParseRationalError::Empty)));
        assert!(matches!(
            parse_rational("1/0"),
            Err(ParseRationalError::ZeroDenominator(_))
        ));
        for bad in ["abc", "1e3", "1/2/3", ".", "1.2.3", "--1", "1/ "] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn decimal_rendering_rounds_half_even() {
        assert_eq!(format_decimal(&q(47, 5), 10), "9.4");
        assert_eq!(format_decimal(&q(1, 3), 10), "0.3333333333");
        assert_eq!(format_decimal(&q(2, 3), 10), "0.6666666667");
        assert_eq!(format_decimal(&q(3, 4), 10), "0.75");
        assert_eq!(format_decimal(&q(0, 1), 10), "0");
        assert_eq!(format_decimal(&q(7, 1), 10), "7");
        // exact ties
        assert_eq!(format_decimal(&q(25, 10), 1), "2");
        assert_eq!(format_decimal(&q(35, 10), 1), "4");
        assert_eq!(format_decimal(&q(125, 1000), 2), "0.12");
        assert_eq!(format_decimal(&q(12345678901, 1), 10), "12345678900");
        assert_eq!(format_decimal(&q(99999999999, 10), 10), "10000000000");
        assert_eq!(format_decimal(&q(-1, 8), 10), "-0.125");
        assert_eq!(format_decimal(&q(1, 1000000), 3), "0.000001");
    }

    #[test]
    fn dyadic_detection() {
        assert!(is_dyadic(&q(5, 8)));
        assert!(is_dyadic(&q(1, 1)));
        assert!(is_dyadic(&q(0, 1)));
        assert!(!is_dyadic(&q(1, 3)));
        assert!(!is_dyadic(&q(3, 10)));
    }

    #[test]
    fn float_pivot_prefers_magnitude() {
        assert!(2.0f64.pivot_cost() < 1.0f64.pivot_cost());
        assert!((-3.0f64).pivot_cost() < 2.0f64.pivot_cost());
        assert!(q(1, 2).pivot_cost() < q(1023, 4096).pivot_cost());
    }
}
