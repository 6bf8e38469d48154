//! Exact rational helpers: decimal parsing and printing, powers of two, and
//! conversions to and from binary floating point.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;
use twofloat::TwoFloat;

/// Exact rational number used throughout the crate.
pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecimalError {
    #[error("empty decimal literal")]
    Empty,
    #[error("invalid character {found:?} at offset {offset} in decimal literal {literal:?}")]
    InvalidCharacter {
        literal: String,
        found: char,
        offset: usize,
    },
    #[error("malformed decimal literal {0:?}")]
    Malformed(String),
    #[error("exponent out of range in {0:?}")]
    ExponentRange(String),
}

/// Parse a decimal literal such as `-0.9998`, `12`, `.5` or `2.5e-3` into an
/// exact rational. Binary floating point is never involved.
pub fn parse_decimal(text: &str) -> Result<Rational, DecimalError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(DecimalError::Empty);
    }
    let (negative, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => {
            let exp_text = &body[pos + 1..];
            let exp: i32 = exp_text
                .parse()
                .map_err(|_| DecimalError::Malformed(s.to_string()))?;
            if exp.abs() > 4096 {
                return Err(DecimalError::ExponentRange(s.to_string()));
            }
            (&body[..pos], exp)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(pos) => (&mantissa[..pos], &mantissa[pos + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(DecimalError::Malformed(s.to_string()));
    }
    for (offset, ch) in int_part.chars().chain(frac_part.chars()).enumerate() {
        if !ch.is_ascii_digit() {
            return Err(DecimalError::InvalidCharacter {
                literal: s.to_string(),
                found: ch,
                offset,
            });
        }
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits
            .parse()
            .map_err(|_| DecimalError::Malformed(s.to_string()))?
    };
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// Render a rational with a terminating decimal expansion exactly.
///
/// Returns `None` when the reduced denominator has a prime factor other than
/// 2 or 5, since no finite decimal string represents such a value.
pub fn format_decimal_exact(value: &Rational) -> Option<String> {
    let mut den = value.denom().clone();
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    let mut twos = 0usize;
    let mut fives = 0usize;
    while den.is_even() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return None;
    }
    let places = twos.max(fives);
    // value * 10^places is an integer
    let scaled = value * Rational::from_integer(num_traits::pow(BigInt::from(10u32), places));
    let integer = scaled.to_integer();
    let negative = integer.is_negative();
    let digits = integer.abs().to_string();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if places == 0 {
        out.push_str(&digits);
        return Some(out);
    }
    let padded = if digits.len() <= places {
        format!("{}{}", "0".repeat(places + 1 - digits.len()), digits)
    } else {
        digits
    };
    let split = padded.len() - places;
    out.push_str(&padded[..split]);
    out.push('.');
    out.push_str(&padded[split..]);
    Some(out)
}

/// Decimal rendering that falls back to `places` digits after the point
/// (round half away from zero) for non-terminating values.
pub fn format_decimal(value: &Rational, places: usize) -> String {
    if let Some(s) = format_decimal_exact(value) {
        return s;
    }
    let scale = Rational::from_integer(num_traits::pow(BigInt::from(10u32), places));
    let rounded = (value * &scale).round() / scale;
    format_decimal_exact(&rounded).expect("power-of-ten denominator")
}

pub fn pow2(exp: u32) -> BigInt {
    BigInt::one() << exp as usize
}

/// 2^-bits as an exact rational.
pub fn grid_step(bits: u32) -> Rational {
    Rational::new(BigInt::one(), pow2(bits))
}

pub fn from_i64(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        if value.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact conversion of a finite float; `None` for NaN or infinities.
pub fn from_f64_exact(value: f64) -> Option<Rational> {
    Rational::from_float(value)
}

/// Nearest double-double to an exact rational.
pub fn to_twofloat(value: &Rational) -> TwoFloat {
    let hi = to_f64(value);
    if !hi.is_finite() {
        return TwoFloat::from(hi);
    }
    let rest = value - Rational::from_float(hi).expect("finite");
    TwoFloat::new_add(hi, to_f64(&rest))
}

/// Exact value of a double-double.
pub fn from_twofloat(value: TwoFloat) -> Option<Rational> {
    Some(Rational::from_float(value.hi())? + Rational::from_float(value.lo())?)
}

/// Simplest continued-fraction convergent of `value` lying within `tolerance`.
pub fn snap_continued_fraction(value: &Rational, tolerance: &Rational) -> Rational {
    let mut rest = value.clone();
    // convergents h/k
    let (mut h_prev, mut h) = (BigInt::zero(), BigInt::one());
    let (mut k_prev, mut k) = (BigInt::one(), BigInt::zero());
    loop {
        let a = rest.floor().to_integer();
        let h_next = &a * &h + &h_prev;
        let k_next = &a * &k + &k_prev;
        h_prev = std::mem::replace(&mut h, h_next);
        k_prev = std::mem::replace(&mut k, k_next);
        let approx = Rational::new(h.clone(), k.clone());
        if (&approx - value).abs() <= *tolerance {
            return approx;
        }
        let frac = &rest - Rational::from_integer(a);
        if frac.is_zero() {
            return approx;
        }
        rest = frac.recip();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parses_plain_and_signed_decimals() {
        assert_eq!(parse_decimal("-0.9998").unwrap(), q(-9998, 10000));
        assert_eq!(parse_decimal("0.0264").unwrap(), q(264, 10000));
        assert_eq!(parse_decimal("12").unwrap(), q(12, 1));
        assert_eq!(parse_decimal(".5").unwrap(), q(1, 2));
        assert_eq!(parse_decimal("+3.").unwrap(), q(3, 1));
        assert_eq!(parse_decimal("2.5e-3").unwrap(), q(25, 10000));
        assert_eq!(parse_decimal("1E2").unwrap(), q(100, 1));
    }

    #[test]
    fn rejects_garbage() {
        assert_eq!(parse_decimal("  ").unwrap_err(), DecimalError::Empty);
        assert!(matches!(
            parse_decimal("1.2x"),
            Err(DecimalError::InvalidCharacter { found: 'x', .. })
        ));
        assert!(parse_decimal("-").is_err());
        assert!(parse_decimal("1e").is_err());
        assert!(parse_decimal("0x10").is_err());
    }

    #[test]
    fn exact_decimal_output() {
        assert_eq!(format_decimal_exact(&q(124256, 65536)).unwrap(), "1.89599609375");
        assert_eq!(format_decimal_exact(&q(-1, 8)).unwrap(), "-0.125");
        assert_eq!(format_decimal_exact(&q(7, 1)).unwrap(), "7");
        assert_eq!(format_decimal_exact(&q(3, 50)).unwrap(), "0.06");
        assert!(format_decimal_exact(&q(1, 3)).is_none());
        assert_eq!(format_decimal(&q(1, 3), 4), "0.3333");
        assert_eq!(format_decimal(&q(2, 3), 4), "0.6667");
    }

    #[test]
    fn continued_fraction_recovers_simple_values() {
        let tol = q(1, 1_000_000_000_000);
        let near_fifth = from_f64_exact(0.2).unwrap();
        assert_eq!(snap_continued_fraction(&near_fifth, &tol), q(1, 5));
        let neg = from_f64_exact(-0.75).unwrap();
        assert_eq!(snap_continued_fraction(&neg, &tol), q(-3, 4));
        let pi = from_f64_exact(std::f64::consts::PI).unwrap();
        let snapped = snap_continued_fraction(&pi, &tol);
        assert!((&snapped - &pi).abs() <= tol);
    }

    #[test]
    fn twofloat_round_trip_is_close() {
        let third = q(1, 3);
        let back = from_twofloat(to_twofloat(&third)).unwrap();
        let err = to_f64(&(back - third).abs());
        assert!(err < 1e-31, "{err}");
    }

    proptest::proptest! {
        #[test]
        fn decimal_print_parse_round_trip(raw in -1_000_000_000i64..1_000_000_000, bits in 0u32..40) {
            let v = Rational::new(BigInt::from(raw), pow2(bits));
            let text = format_decimal_exact(&v).unwrap();
            proptest::prop_assert_eq!(parse_decimal(&text).unwrap(), v);
        }
    }
}
