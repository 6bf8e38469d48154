//! Polynomials in `z`, transfer functions, uncertain plant families and the
//! closed-loop characteristic polynomial.
//!
//! Polynomials are stored in descending powers of `z` (index 0 is the highest
//! power). Forms written in powers of `z^-1` are converted on construction via
//! [`TransferFunction::from_z_inverse`].

use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixedpoint::{FixedPointError, FixedPointFormat, FixedPointValue, Rounding};
use crate::interval::RationalInterval;
use crate::rational::{format_decimal, to_f64, Rational};
use crate::roots::poly_roots;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransferError {
    #[error("denominator is the zero polynomial")]
    ZeroDenominator,
    #[error("characteristic polynomial is identically zero")]
    DegenerateCharPoly,
    #[error("uncertainty vector has {found} entries, expected {expected}")]
    DeltaLength { expected: usize, found: usize },
    #[error("uncertainty entry {index} is negative")]
    NegativeDelta { index: usize },
    #[error("packed vector of length {len} cannot be split at {num_len}")]
    BadPacking { len: usize, num_len: usize },
    #[error("controller coefficients must share one format")]
    MixedFormats,
    #[error("controller polynomials must be nonempty")]
    EmptyController,
    #[error(transparent)]
    FixedPoint(#[from] FixedPointError),
}

/// Polynomial with exact rational coefficients, highest power first.
///
/// Leading zeros are kept until [`Poly::normalized`] is called, so the
/// nominal degree of a product survives a vanishing leading term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<Rational>,
}

impl Poly {
    pub fn new(coeffs: Vec<Rational>) -> Self {
        if coeffs.is_empty() {
            return Self::zero();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self {
            coeffs: vec![Rational::zero()],
        }
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|c| Rational::from_integer(BigInt::from(*c))).collect())
    }

    /// `z - root`.
    pub fn linear_factor(root: Rational) -> Self {
        Self::new(vec![Rational::one(), -root])
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nominal_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// Degree after stripping leading zeros; 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.normalized().nominal_degree()
    }

    pub fn leading(&self) -> &Rational {
        &self.coeffs[0]
    }

    /// Leading zeros removed (the zero polynomial keeps one coefficient).
    pub fn normalized(&self) -> Self {
        let start = self
            .coeffs
            .iter()
            .position(|c| !c.is_zero())
            .unwrap_or(self.coeffs.len() - 1);
        Self {
            coeffs: self.coeffs[start..].to_vec(),
        }
    }

    /// Pad with leading zeros to `len` coefficients.
    pub fn padded(&self, len: usize) -> Self {
        if len <= self.coeffs.len() {
            return self.clone();
        }
        let mut coeffs = vec![Rational::zero(); len - self.coeffs.len()];
        coeffs.extend(self.coeffs.iter().cloned());
        Self { coeffs }
    }

    pub fn neg(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| -c).collect())
    }

    pub fn scale(&self, k: &Rational) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.len().max(other.len());
        let (a, b) = (self.padded(n), other.padded(n));
        Self::new(a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![Rational::zero(); self.len() + other.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.coeffs.iter().fold(Rational::zero(), |acc, c| acc * x + c)
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.coeffs.iter().map(to_f64).collect()
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + to_f64(c))
    }

    /// Floating-point roots (leading zeros ignored).
    pub fn roots(&self) -> Vec<Complex64> {
        poly_roots(&self.to_f64_vec())
    }

    /// Quotient and remainder of polynomial long division.
    ///
    /// # Panics
    /// If `divisor` is the zero polynomial.
    pub fn div_rem(&self, divisor: &Self) -> (Self, Self) {
        let d = divisor.normalized();
        assert!(!d.is_zero(), "polynomial division by zero");
        let mut rem = self.normalized().coeffs;
        if rem.len() < d.len() {
            return (Self::zero(), Self::new(rem));
        }
        let mut quot = vec![Rational::zero(); rem.len() - d.len() + 1];
        for i in 0..quot.len() {
            let factor = &rem[i] / d.leading();
            if factor.is_zero() {
                continue;
            }
            for (j, c) in d.coeffs.iter().enumerate() {
                rem[i + j] -= &factor * c;
            }
            quot[i] = factor;
        }
        let tail = rem.split_off(quot.len());
        (Self::new(quot), Self::new(tail).normalized())
    }

    /// Leading coefficient scaled to one (zero stays zero).
    pub fn monic(&self) -> Self {
        let p = self.normalized();
        if p.is_zero() {
            return p;
        }
        let lead = p.leading().clone();
        p.scale(&lead.recip())
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, other: &Self) -> Self {
        let mut a = self.normalized();
        let mut b = other.normalized();
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.nominal_degree();
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() && !(first && i == n) {
                continue;
            }
            let power = n - i;
            let magnitude = format_decimal(&c.abs(), 12);
            if first {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if c.is_negative() { " - " } else { " + " })?;
            }
            first = false;
            match power {
                0 => f.write_str(&magnitude)?,
                1 => write!(f, "{magnitude}z")?,
                _ => write!(f, "{magnitude}z^{power}")?,
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// Rational transfer function `num(z) / den(z)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransferFunction {
    num: Poly,
    den: Poly,
}

impl TransferFunction {
    /// Leading zeros of both polynomials are stripped.
    pub fn new(num: Poly, den: Poly) -> Result<Self, TransferError> {
        if den.is_zero() {
            return Err(TransferError::ZeroDenominator);
        }
        Ok(Self {
            num: num.normalized(),
            den: den.normalized(),
        })
    }

    /// Build from coefficients of `z^0, z^-1, z^-2, ...` by multiplying
    /// numerator and denominator by the largest power of `z` involved.
    pub fn from_z_inverse(num: &[Rational], den: &[Rational]) -> Result<Self, TransferError> {
        let len = num.len().max(den.len()).max(1);
        let lift = |c: &[Rational]| {
            let mut v = c.to_vec();
            v.resize(len, Rational::zero());
            Poly::new(v)
        };
        Self::new(lift(num), lift(den))
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_proper(&self) -> bool {
        self.num.degree() <= self.den.degree() || self.num.is_zero()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() < self.den.degree()
    }

    /// `[n_0 .. n_M d_0 .. d_N]`.
    pub fn pack_coefficients(&self) -> Vec<Rational> {
        self.num.coeffs.iter().chain(&self.den.coeffs).cloned().collect()
    }

    pub fn unpack_coefficients(packed: &[Rational], num_len: usize) -> Result<Self, TransferError> {
        if num_len == 0 || num_len >= packed.len() {
            return Err(TransferError::BadPacking {
                len: packed.len(),
                num_len,
            });
        }
        Self::new(
            Poly::new(packed[..num_len].to_vec()),
            Poly::new(packed[num_len..].to_vec()),
        )
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.num.eval_complex(z) / self.den.eval_complex(z)
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.den.roots()
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        self.num.roots()
    }

    /// Common factors of numerator and denominator cancelled, denominator monic.
    pub fn reduced(&self) -> Self {
        if self.num.is_zero() {
            return Self {
                num: Poly::zero(),
                den: Poly::one(),
            };
        }
        let g = self.num.gcd(&self.den);
        let num = self.num.div_rem(&g).0;
        let den = self.den.div_rem(&g).0;
        let lead = den.leading().recip();
        Self {
            num: num.scale(&lead).normalized(),
            den: den.scale(&lead).normalized(),
        }
    }
}

impl fmt::Display for TransferFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

/// Nominal plant plus nonnegative additive uncertainty on every coefficient,
/// checked at plant precision `<Ip,Fp>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantFamily {
    nominal: TransferFunction,
    delta: Vec<Rational>,
    plant_format: FixedPointFormat,
}

impl PlantFamily {
    pub fn new(
        nominal: TransferFunction,
        delta: Vec<Rational>,
        plant_format: FixedPointFormat,
    ) -> Result<Self, TransferError> {
        let expected = nominal.num.len() + nominal.den.len();
        if delta.len() != expected {
            return Err(TransferError::DeltaLength {
                expected,
                found: delta.len(),
            });
        }
        if let Some(index) = delta.iter().position(Signed::is_negative) {
            return Err(TransferError::NegativeDelta { index });
        }
        Ok(Self {
            nominal,
            delta,
            plant_format,
        })
    }

    /// Family with the same magnitude on every coefficient.
    pub fn uniform(
        nominal: TransferFunction,
        delta: Rational,
        plant_format: FixedPointFormat,
    ) -> Result<Self, TransferError> {
        let n = nominal.num.len() + nominal.den.len();
        Self::new(nominal, vec![delta; n], plant_format)
    }

    pub fn nominal(&self) -> &TransferFunction {
        &self.nominal
    }

    pub fn delta(&self) -> &[Rational] {
        &self.delta
    }

    pub fn plant_format(&self) -> FixedPointFormat {
        self.plant_format
    }

    pub fn with_plant_format(&self, plant_format: FixedPointFormat) -> Self {
        Self {
            plant_format,
            ..self.clone()
        }
    }

    pub fn num_len(&self) -> usize {
        self.nominal.num.len()
    }

    pub fn is_point(&self) -> bool {
        self.delta.iter().all(Zero::is_zero)
    }

    /// Per-coefficient box `[c - delta, c + delta]` rounded outward onto the
    /// `<Ip,Fp>` grid: every plant whose coefficients are representable at
    /// plant precision and lie in the family.
    pub fn grid_box(&self) -> Vec<RationalInterval> {
        let bits = self.plant_format.fraction_bits();
        self.nominal
            .pack_coefficients()
            .iter()
            .zip(&self.delta)
            .map(|(c, d)| RationalInterval::point(c.clone()).inflate(d).outward_to_grid(bits))
            .collect()
    }

    pub fn plant_from_packed(&self, packed: &[Rational]) -> Result<TransferFunction, TransferError> {
        TransferFunction::unpack_coefficients(packed, self.num_len())
    }

    /// Whether every packed coefficient of `plant` lies in the grid box.
    pub fn contains(&self, plant: &TransferFunction) -> bool {
        let packed = plant.pack_coefficients();
        let bx = self.grid_box();
        packed.len() == bx.len() && bx.iter().zip(&packed).all(|(iv, c)| iv.contains(c))
    }
}

/// Fixed-point controller `num(z) / den(z)`; every coefficient shares one
/// `<I,F>` format.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Controller {
    num: Vec<FixedPointValue>,
    den: Vec<FixedPointValue>,
    format: FixedPointFormat,
}

impl Controller {
    pub fn new(num: Vec<FixedPointValue>, den: Vec<FixedPointValue>) -> Result<Self, TransferError> {
        let format = num.first().or(den.first()).ok_or(TransferError::EmptyController)?.format();
        if num.is_empty() || den.is_empty() {
            return Err(TransferError::EmptyController);
        }
        if num.iter().chain(&den).any(|v| v.format() != format) {
            return Err(TransferError::MixedFormats);
        }
        Ok(Self { num, den, format })
    }

    /// Quantize rational coefficients onto `format`.
    pub fn quantized(
        num: &[Rational],
        den: &[Rational],
        format: FixedPointFormat,
        rounding: Rounding,
    ) -> Result<Self, TransferError> {
        let q = |c: &[Rational]| crate::fixedpoint::quantize_poly(c, format, rounding);
        Self::new(q(num)?, q(den)?)
    }

    pub fn from_raws(num: &[i128], den: &[i128], format: FixedPointFormat) -> Result<Self, TransferError> {
        let lift = |raws: &[i128]| -> Result<Vec<_>, FixedPointError> {
            raws.iter().map(|r| FixedPointValue::from_raw(*r, format)).collect()
        };
        Self::new(lift(num)?, lift(den)?)
    }

    /// All coefficients zero, with `num_order + 1` and `den_order + 1` terms.
    pub fn zero(format: FixedPointFormat, num_order: usize, den_order: usize) -> Self {
        Self {
            num: vec![FixedPointValue::zero(format); num_order + 1],
            den: vec![FixedPointValue::zero(format); den_order + 1],
            format,
        }
    }

    pub fn num(&self) -> &[FixedPointValue] {
        &self.num
    }

    pub fn den(&self) -> &[FixedPointValue] {
        &self.den
    }

    pub fn format(&self) -> FixedPointFormat {
        self.format
    }

    pub fn orders(&self) -> (usize, usize) {
        (self.num.len() - 1, self.den.len() - 1)
    }

    pub fn num_poly(&self) -> Poly {
        Poly::new(self.num.iter().map(FixedPointValue::to_rational).collect())
    }

    pub fn den_poly(&self) -> Poly {
        Poly::new(self.den.iter().map(FixedPointValue::to_rational).collect())
    }

    /// Raw integers, numerator first.
    pub fn raws(&self) -> Vec<i128> {
        self.num.iter().chain(&self.den).map(FixedPointValue::raw).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().chain(&self.den).all(FixedPointValue::is_zero)
    }

    pub fn transfer_function(&self) -> Result<TransferFunction, TransferError> {
        TransferFunction::new(self.num_poly(), self.den_poly())
    }
}

impl fmt::Display for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({}) @ {}", self.num_poly(), self.den_poly(), self.format)
    }
}

/// Closed-loop characteristic polynomial `S = Cn*Gn + Cd*Gd` in exact arithmetic.
///
/// The result keeps its nominal degree; a vanishing leading coefficient is
/// left for the stability test to reject.
pub fn char_poly(controller: &Controller, plant: &TransferFunction) -> Result<Poly, TransferError> {
    let s = controller
        .num_poly()
        .mul(&plant.num)
        .add(&controller.den_poly().mul(&plant.den));
    if s.is_zero() {
        return Err(TransferError::DegenerateCharPoly);
    }
    Ok(s)
}

/// `S` evaluated in `<Ip,Fp>` fixed point with truncating products.
///
/// Plant coefficients are quantized onto the plant grid first and the
/// controller is rescaled into the plant format.
pub fn char_poly_fixed(
    controller: &Controller,
    plant: &TransferFunction,
    plant_format: FixedPointFormat,
) -> Result<Vec<FixedPointValue>, TransferError> {
    let q = |p: &Poly| crate::fixedpoint::quantize_poly(p.coeffs(), plant_format, Rounding::Truncate);
    let gn = q(&plant.num)?;
    let gd = q(&plant.den)?;
    let widen = |c: &[FixedPointValue]| -> Result<Vec<_>, FixedPointError> {
        c.iter().map(|v| v.rescale(plant_format)).collect()
    };
    let cn = widen(&controller.num)?;
    let cd = widen(&controller.den)?;
    let a = fixed_poly_mul(&cn, &gn)?;
    let b = fixed_poly_mul(&cd, &gd)?;
    let n = a.len().max(b.len());
    let zero = FixedPointValue::zero(plant_format);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let x = if i + a.len() >= n { a[i + a.len() - n] } else { zero };
        let y = if i + b.len() >= n { b[i + b.len() - n] } else { zero };
        out.push(x.checked_add(&y)?);
    }
    if out.iter().all(FixedPointValue::is_zero) {
        return Err(TransferError::DegenerateCharPoly);
    }
    Ok(out)
}

fn fixed_poly_mul(a: &[FixedPointValue], b: &[FixedPointValue]) -> Result<Vec<FixedPointValue>, FixedPointError> {
    let format = a[0].format();
    let mut out = vec![FixedPointValue::zero(format); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j].checked_add(&x.checked_mul(y)?)?;
        }
    }
    Ok(out)
}

/// Whether `C*G` cancels a root on or outside the unit circle: some root of
/// `Cn*Gn` and some root of `Cd*Gd` are within `tol` of each other and both
/// have modulus at least `1 - tol`.
pub fn cancellation_on_or_outside_unit_circle(controller: &Controller, plant: &TransferFunction, tol: f64) -> bool {
    let zeros = controller.num_poly().mul(&plant.num).roots();
    let poles = controller.den_poly().mul(&plant.den).roots();
    zeros.iter().any(|z| {
        z.norm() >= 1.0 - tol && poles.iter().any(|p| p.norm() >= 1.0 - tol && (z - p).norm() <= tol)
    })
}

pub const DEFAULT_CANCELLATION_TOL: f64 = 1e-6;
