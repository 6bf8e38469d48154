//! Fixed-point numbers in format `<I,F>`: a signed scaled integer `raw` whose
//! value is exactly `raw * 2^-F`, with `|value| < 2^I`.
//!
//! Arithmetic is exact-then-truncate: every operation computes the exact
//! result and truncates it toward zero back onto the `2^-F` grid. Leaving the
//! representable range is always an error; nothing wraps or saturates.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{format_decimal_exact, pow2, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FixedPointError {
    #[error("invalid fixed-point format <{integer_bits},{fraction_bits}>: {reason}")]
    InvalidFormat {
        integer_bits: u32,
        fraction_bits: u32,
        reason: &'static str,
    },
    #[error("value does not fit in {format}")]
    Overflow { format: FixedPointFormat },
    #[error("division by zero")]
    DivisionByZero,
    #[error("operands have different formats ({0} vs {1})")]
    FormatMismatch(FixedPointFormat, FixedPointFormat),
    #[error("value is not finite")]
    NotFinite,
}

/// Word layout `<I,F>`: `I` integer bits (sign excluded) and `F` fraction bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FixedPointFormat {
    integer_bits: u32,
    fraction_bits: u32,
}

impl FixedPointFormat {
    pub const MAX_TOTAL_BITS: u32 = 64;

    pub fn new(integer_bits: u32, fraction_bits: u32) -> Result<Self, FixedPointError> {
        let invalid = |reason| FixedPointError::InvalidFormat {
            integer_bits,
            fraction_bits,
            reason,
        };
        if integer_bits < 1 {
            return Err(invalid("at least one integer bit is required"));
        }
        if integer_bits + fraction_bits > Self::MAX_TOTAL_BITS {
            return Err(invalid("I + F must not exceed 64"));
        }
        Ok(Self {
            integer_bits,
            fraction_bits,
        })
    }

    pub fn integer_bits(&self) -> u32 {
        self.integer_bits
    }

    pub fn fraction_bits(&self) -> u32 {
        self.fraction_bits
    }

    /// Exclusive bound on `|raw|`, i.e. `2^(I+F)`.
    pub fn raw_bound(&self) -> u128 {
        1u128 << (self.integer_bits + self.fraction_bits)
    }

    pub fn max_raw(&self) -> i128 {
        (self.raw_bound() - 1) as i128
    }

    /// Grid spacing `2^-F`.
    pub fn ulp(&self) -> Rational {
        crate::rational::grid_step(self.fraction_bits)
    }

    /// Number of distinct representable values, `2^(I+F+1) - 1`.
    pub fn grid_size(&self) -> u128 {
        2 * self.raw_bound() - 1
    }

    /// True when every value of `other` is representable in `self`.
    pub fn includes(&self, other: &FixedPointFormat) -> bool {
        self.integer_bits >= other.integer_bits && self.fraction_bits >= other.fraction_bits
    }

    pub fn widened(&self, integer_step: u32, fraction_step: u32) -> Result<Self, FixedPointError> {
        Self::new(
            self.integer_bits + integer_step,
            self.fraction_bits + fraction_step,
        )
    }

    /// Smallest format holding both operands' formats.
    pub fn widest(&self, other: Self) -> Self {
        Self {
            integer_bits: self.integer_bits.max(other.integer_bits),
            fraction_bits: self.fraction_bits.max(other.fraction_bits),
        }
    }
}

impl fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{}>", self.integer_bits, self.fraction_bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rounding {
    /// Toward zero.
    Truncate,
    /// Closest grid value, ties away from zero.
    Nearest,
}

impl std::str::FromStr for Rounding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "truncate" => Ok(Rounding::Truncate),
            "nearest" => Ok(Rounding::Nearest),
            other => Err(format!("unknown rounding mode {other:?} (expected truncate|nearest)")),
        }
    }
}

impl fmt::Display for Rounding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rounding::Truncate => "truncate",
            Rounding::Nearest => "nearest",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedPointValue {
    raw: i128,
    format: FixedPointFormat,
}

fn checked_raw(magnitude: u128, negative: bool, format: FixedPointFormat) -> Result<i128, FixedPointError> {
    if magnitude >= format.raw_bound() {
        return Err(FixedPointError::Overflow { format });
    }
    let m = magnitude as i128;
    Ok(if negative { -m } else { m })
}

fn round_scaled(scaled: &Rational, rounding: Rounding) -> BigInt {
    match rounding {
        Rounding::Truncate => scaled.trunc().to_integer(),
        // Ratio::round is half away from zero
        Rounding::Nearest => scaled.round().to_integer(),
    }
}

impl FixedPointValue {
    pub fn from_raw(raw: i128, format: FixedPointFormat) -> Result<Self, FixedPointError> {
        checked_raw(raw.unsigned_abs(), raw < 0, format)?;
        Ok(Self { raw, format })
    }

    pub fn zero(format: FixedPointFormat) -> Self {
        Self { raw: 0, format }
    }

    pub fn raw(&self) -> i128 {
        self.raw
    }

    pub fn format(&self) -> FixedPointFormat {
        self.format
    }

    pub fn is_zero(&self) -> bool {
        self.raw == 0
    }

    pub fn signum(&self) -> i32 {
        self.raw.signum() as i32
    }

    pub fn to_rational(&self) -> Rational {
        Rational::new(BigInt::from(self.raw), pow2(self.format.fraction_bits))
    }

    pub fn to_f64(&self) -> f64 {
        // exact whenever |raw| < 2^53
        self.raw as f64 / (self.format.fraction_bits as f64).exp2()
    }

    pub fn quantize(x: &Rational, format: FixedPointFormat, rounding: Rounding) -> Result<Self, FixedPointError> {
        let scaled = x * Rational::from_integer(pow2(format.fraction_bits));
        let raw = round_scaled(&scaled, rounding);
        let magnitude = raw
            .abs()
            .to_u128()
            .ok_or(FixedPointError::Overflow { format })?;
        let raw = checked_raw(magnitude, raw.is_negative(), format)?;
        Ok(Self { raw, format })
    }

    /// Quantize a binary float. Scaling by `2^F` is exact in floating point,
    /// so only the final rounding step loses information.
    pub fn quantize_f64(x: f64, format: FixedPointFormat, rounding: Rounding) -> Result<Self, FixedPointError> {
        if !x.is_finite() {
            return Err(FixedPointError::NotFinite);
        }
        let scaled = x * (format.fraction_bits as f64).exp2();
        let rounded = match rounding {
            Rounding::Truncate => scaled.trunc(),
            Rounding::Nearest => scaled.round(),
        };
        if !rounded.is_finite() || rounded.abs() >= (format.raw_bound() as f64) {
            return Err(FixedPointError::Overflow { format });
        }
        Self::from_raw(rounded as i128, format)
    }

    /// Re-express in another format: exact when `to` has at least as many
    /// fraction bits, otherwise truncated toward zero.
    pub fn rescale(&self, to: FixedPointFormat) -> Result<Self, FixedPointError> {
        let from_f = self.format.fraction_bits;
        let to_f = to.fraction_bits;
        let magnitude = self.raw.unsigned_abs();
        let magnitude = if to_f >= from_f {
            let shift = to_f - from_f;
            if shift >= 128 || magnitude.leading_zeros() < shift {
                return Err(FixedPointError::Overflow { format: to });
            }
            magnitude << shift
        } else {
            magnitude >> (from_f - to_f)
        };
        let raw = checked_raw(magnitude, self.raw < 0, to)?;
        Ok(Self { raw, format: to })
    }

    fn same_format(&self, other: &Self) -> Result<FixedPointFormat, FixedPointError> {
        if self.format != other.format {
            return Err(FixedPointError::FormatMismatch(self.format, other.format));
        }
        Ok(self.format)
    }

    pub fn checked_neg(&self) -> Self {
        // the representable range is symmetric
        Self {
            raw: -self.raw,
            format: self.format,
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, FixedPointError> {
        let format = self.same_format(other)?;
        let sum = self.raw + other.raw;
        let raw = checked_raw(sum.unsigned_abs(), sum < 0, format)?;
        Ok(Self { raw, format })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, FixedPointError> {
        self.checked_add(&other.checked_neg())
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, FixedPointError> {
        let format = self.same_format(other)?;
        // |raw| < 2^64, so the full product fits in u128
        let product = self.raw.unsigned_abs() * other.raw.unsigned_abs();
        let magnitude = product >> format.fraction_bits;
        let negative = (self.raw < 0) != (other.raw < 0);
        let raw = checked_raw(magnitude, negative && magnitude != 0, format)?;
        Ok(Self { raw, format })
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, FixedPointError> {
        let format = self.same_format(other)?;
        if other.raw == 0 {
            return Err(FixedPointError::DivisionByZero);
        }
        // |raw| < 2^64 and F <= 63, so the shifted dividend fits in u128
        let dividend = self.raw.unsigned_abs() << format.fraction_bits;
        let magnitude = dividend / other.raw.unsigned_abs();
        let negative = (self.raw < 0) != (other.raw < 0);
        let raw = checked_raw(magnitude, negative && magnitude != 0, format)?;
        Ok(Self { raw, format })
    }

    /// Exact decimal expansion of the value.
    pub fn to_decimal_string(&self) -> String {
        format_decimal_exact(&self.to_rational()).expect("dyadic values have finite decimal expansions")
    }
}

impl PartialOrd for FixedPointValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.format == other.format {
            Some(self.raw.cmp(&other.raw))
        } else {
            Some(self.to_rational().cmp(&other.to_rational()))
        }
    }
}

impl fmt::Display for FixedPointValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

pub fn quantize_nearest(x: &Rational, format: FixedPointFormat) -> Result<FixedPointValue, FixedPointError> {
    FixedPointValue::quantize(x, format, Rounding::Nearest)
}

pub fn quantize_truncate(x: &Rational, format: FixedPointFormat) -> Result<FixedPointValue, FixedPointError> {
    FixedPointValue::quantize(x, format, Rounding::Truncate)
}

pub fn fp_add(a: &FixedPointValue, b: &FixedPointValue) -> Result<FixedPointValue, FixedPointError> {
    a.checked_add(b)
}

pub fn fp_sub(a: &FixedPointValue, b: &FixedPointValue) -> Result<FixedPointValue, FixedPointError> {
    a.checked_sub(b)
}

pub fn fp_mul(a: &FixedPointValue, b: &FixedPointValue) -> Result<FixedPointValue, FixedPointError> {
    a.checked_mul(b)
}

pub fn fp_div(a: &FixedPointValue, b: &FixedPointValue) -> Result<FixedPointValue, FixedPointError> {
    a.checked_div(b)
}

/// Quantize every coefficient of a polynomial with the same rounding mode.
pub fn quantize_poly(
    coeffs: &[Rational],
    format: FixedPointFormat,
    rounding: Rounding,
) -> Result<Vec<FixedPointValue>, FixedPointError> {
    coeffs
        .iter()
        .map(|c| FixedPointValue::quantize(c, format, rounding))
        .collect()
}
