//! Closed intervals with exact rational endpoints.
//!
//! Because endpoints are exact, every operation returns the tightest
//! enclosure of the image set. Outward rounding only happens when an
//! interval is snapped onto a dyadic grid (`lo` floors, `hi` ceils).

use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{format_decimal, pow2, Rational};
use crate::transfer::{Controller, PlantFamily, Poly};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IntervalError {
    #[error("interval bounds are inverted ({lo} > {hi})")]
    Inverted { lo: String, hi: String },
    #[error("divisor interval contains zero")]
    DivisorContainsZero,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RationalInterval {
    lo: Rational,
    hi: Rational,
}

impl RationalInterval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self, IntervalError> {
        if lo > hi {
            return Err(IntervalError::Inverted {
                lo: lo.to_string(),
                hi: hi.to_string(),
            });
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: Rational) -> Self {
        Self { lo: x.clone(), hi: x }
    }

    pub fn zero() -> Self {
        Self::point(Rational::zero())
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / Rational::from_integer(BigInt::from(2))
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_zero(&self) -> bool {
        !self.lo.is_positive() && !self.hi.is_negative()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// Every member is strictly positive.
    pub fn is_positive(&self) -> bool {
        self.lo.is_positive()
    }

    /// Every member is strictly negative.
    pub fn is_negative(&self) -> bool {
        self.hi.is_negative()
    }

    pub fn hull(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            lo: -&self.hi,
            hi: -&self.lo,
        }
    }

    pub fn abs(&self) -> Self {
        if !self.lo.is_negative() {
            self.clone()
        } else if !self.hi.is_positive() {
            self.neg()
        } else {
            Self {
                lo: Rational::zero(),
                hi: self.hi.clone().max(-&self.lo),
            }
        }
    }

    /// `[lo - r, hi + r]` for `r >= 0`.
    pub fn inflate(&self, r: &Rational) -> Self {
        Self {
            lo: &self.lo - r,
            hi: &self.hi + r,
        }
    }

    /// Smallest interval with endpoints on the `2^-bits` grid that contains `self`.
    pub fn outward_to_grid(&self, bits: u32) -> Self {
        let scale = Rational::from_integer(pow2(bits));
        let lo = (&self.lo * &scale).floor() / &scale;
        let hi = (&self.hi * &scale).ceil() / &scale;
        Self { lo, hi }
    }

    /// Halves `[lo, mid]` and `[mid, hi]`.
    pub fn bisect(&self) -> (Self, Self) {
        let mid = self.midpoint();
        (
            Self {
                lo: self.lo.clone(),
                hi: mid.clone(),
            },
            Self {
                lo: mid,
                hi: self.hi.clone(),
            },
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            lo: &self.lo - &other.hi,
            hi: &self.hi - &other.lo,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_point() && other.is_point() {
            return Self::point(&self.lo * &other.lo);
        }
        let products = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let mut lo = products[0].clone();
        let mut hi = products[0].clone();
        for p in &products[1..] {
            if *p < lo {
                lo = p.clone();
            }
            if *p > hi {
                hi = p.clone();
            }
        }
        Self { lo, hi }
    }

    pub fn scale(&self, k: &Rational) -> Self {
        if k.is_negative() {
            Self {
                lo: &self.hi * k,
                hi: &self.lo * k,
            }
        } else {
            Self {
                lo: &self.lo * k,
                hi: &self.hi * k,
            }
        }
    }

    pub fn recip(&self) -> Result<Self, IntervalError> {
        if self.contains_zero() {
            return Err(IntervalError::DivisorContainsZero);
        }
        Ok(Self {
            lo: self.hi.recip(),
            hi: self.lo.recip(),
        })
    }

    pub fn div(&self, other: &Self) -> Result<Self, IntervalError> {
        Ok(self.mul(&other.recip()?))
    }
}

impl fmt::Display for RationalInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", format_decimal(&self.lo, 12), format_decimal(&self.hi, 12))
    }
}

pub fn iv_add(a: &RationalInterval, b: &RationalInterval) -> RationalInterval {
    a.add(b)
}

pub fn iv_sub(a: &RationalInterval, b: &RationalInterval) -> RationalInterval {
    a.sub(b)
}

pub fn iv_mul(a: &RationalInterval, b: &RationalInterval) -> RationalInterval {
    a.mul(b)
}

pub fn iv_div(a: &RationalInterval, b: &RationalInterval) -> Result<RationalInterval, IntervalError> {
    a.div(b)
}

/// Polynomial with interval coefficients in descending powers of `z`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalPoly {
    coeffs: Vec<RationalInterval>,
}

impl IntervalPoly {
    /// An empty coefficient list becomes the zero polynomial.
    pub fn new(coeffs: Vec<RationalInterval>) -> Self {
        if coeffs.is_empty() {
            return Self {
                coeffs: vec![RationalInterval::zero()],
            };
        }
        Self { coeffs }
    }

    pub fn from_poly(p: &Poly) -> Self {
        Self::new(p.coeffs().iter().cloned().map(RationalInterval::point).collect())
    }

    pub fn coeffs(&self) -> &[RationalInterval] {
        &self.coeffs
    }

    pub fn nominal_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn neg(&self) -> Self {
        Self::new(self.coeffs.iter().map(RationalInterval::neg).collect())
    }

    /// Sum with lower-order coefficients aligned.
    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let pad = |p: &Self, i: usize| {
            let offset = n - p.coeffs.len();
            if i < offset {
                RationalInterval::zero()
            } else {
                p.coeffs[i - offset].clone()
            }
        };
        Self::new((0..n).map(|i| pad(self, i).add(&pad(other, i))).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.coeffs.len() + other.coeffs.len() - 1;
        let mut out = vec![RationalInterval::zero(); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        Self::new(out)
    }

    /// Interval Horner evaluation at an exact point.
    pub fn eval(&self, x: &Rational) -> RationalInterval {
        let mut acc = RationalInterval::zero();
        for c in &self.coeffs {
            acc = acc.scale(x).add(c);
        }
        acc
    }

    pub fn contains_poly(&self, p: &Poly) -> bool {
        p.coeffs().len() == self.coeffs.len() && self.coeffs.iter().zip(p.coeffs()).all(|(iv, c)| iv.contains(c))
    }

    /// The polynomial of interval midpoints.
    pub fn midpoint(&self) -> Poly {
        Poly::new(self.coeffs.iter().map(RationalInterval::midpoint).collect())
    }
}

/// Enclosure `[c - delta - 2^-bits, c + delta + 2^-bits]` of one plant
/// coefficient; without a grid the rounding term is dropped.
pub fn coefficient_enclosure(c: &Rational, delta: &Rational, grid_bits: Option<u32>) -> RationalInterval {
    let mut radius = delta.abs();
    if let Some(bits) = grid_bits {
        radius += crate::rational::grid_step(bits);
    }
    RationalInterval::point(c.clone()).inflate(&radius)
}

/// Numerator and denominator enclosures covering every plant of the family
/// together with its rounding onto the `<Ip,Fp>` grid.
pub fn family_to_interval_poly(family: &PlantFamily) -> (IntervalPoly, IntervalPoly) {
    let bits = Some(family.plant_format().fraction_bits());
    let boxes: Vec<RationalInterval> = family
        .nominal()
        .pack_coefficients()
        .iter()
        .zip(family.delta())
        .map(|(c, d)| coefficient_enclosure(c, d, bits))
        .collect();
    split_packed(&boxes, family.nominal().num().coeffs().len())
}

/// Split a packed coefficient box (numerator first) into two interval polynomials.
pub fn split_packed(boxes: &[RationalInterval], num_len: usize) -> (IntervalPoly, IntervalPoly) {
    (
        IntervalPoly::new(boxes[..num_len].to_vec()),
        IntervalPoly::new(boxes[num_len..].to_vec()),
    )
}

/// `Cn*Gn + Cd*Gd` over interval plant coefficients.
pub fn interval_char_poly(controller: &Controller, num: &IntervalPoly, den: &IntervalPoly) -> IntervalPoly {
    let cn = IntervalPoly::from_poly(&controller.num_poly());
    let cd = IntervalPoly::from_poly(&controller.den_poly());
    cn.mul(num).add(&cd.mul(den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{grid_step, parse_decimal};
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    fn iv(lo: i64, hi: i64) -> RationalInterval {
        RationalInterval::new(q(lo, 1), q(hi, 1)).unwrap()
    }

    #[test]
    fn arithmetic_examples() {
        assert_eq!(iv(1, 2).mul(&iv(3, 4)), iv(3, 8));
        assert_eq!(iv(-1, 2).mul(&iv(-3, 4)), iv(-6, 8));
        assert_eq!(iv(0, 0).add(&iv(-3, 7)), iv(-3, 7));
        assert_eq!(iv(4, 6).div(&iv(2, 2)).unwrap(), iv(2, 3));
        assert_eq!(
            iv(1, 2).div(&iv(-2, -1)).unwrap(),
            RationalInterval::new(q(-2, 1), q(-1, 2)).unwrap()
        );
        assert_eq!(iv(1, 2).div(&iv(-1, 1)).unwrap_err(), IntervalError::DivisorContainsZero);
        assert_eq!(iv(1, 2).sub(&iv(3, 5)), iv(-4, -1));
        assert!(RationalInterval::new(q(1, 1), q(0, 1)).is_err());
    }

    #[test]
    fn abs_and_sign_tests() {
        assert_eq!(iv(-3, 2).abs(), iv(0, 3));
        assert_eq!(iv(-3, -2).abs(), iv(2, 3));
        assert!(iv(1, 2).is_positive());
        assert!(!iv(0, 2).is_positive());
        assert!(iv(-1, 0).contains_zero());
    }

    #[test]
    fn grid_rounding_is_outward() {
        let x = RationalInterval::point(parse_decimal("0.0264").unwrap());
        let r = x.outward_to_grid(16);
        assert!(x.is_subset_of(&r));
        assert_eq!(r.width(), grid_step(16));
        let on_grid = RationalInterval::point(q(3, 4));
        assert_eq!(on_grid.outward_to_grid(2), on_grid);
    }

    #[test]
    fn enclosure_examples() {
        let c = parse_decimal("0.0264").unwrap();
        let e = coefficient_enclosure(&c, &Rational::zero(), Some(24));
        assert_eq!(e.lo(), &(&c - grid_step(24)));
        assert_eq!(e.hi(), &(&c + grid_step(24)));
        let e = coefficient_enclosure(&q(1, 1), &q(1, 2), None);
        assert_eq!(e, RationalInterval::new(q(1, 2), q(3, 2)).unwrap());
        let e = coefficient_enclosure(&Rational::zero(), &Rational::zero(), Some(24));
        assert_eq!(e, RationalInterval::new(-grid_step(24), grid_step(24)).unwrap());
    }

    #[test]
    fn interval_poly_eval_and_products() {
        // (z + [0,1]) * (z - 1)
        let a = IntervalPoly::new(vec![iv(1, 1), iv(0, 1)]);
        let b = IntervalPoly::new(vec![iv(1, 1), iv(-1, -1)]);
        let p = a.mul(&b);
        assert_eq!(p.coeffs(), &[iv(1, 1), iv(-1, 0), iv(-1, 0)]);
        assert_eq!(p.eval(&q(1, 1)), iv(-1, 1));
        let s = a.add(&IntervalPoly::new(vec![iv(2, 2)]));
        assert_eq!(s.coeffs(), &[iv(1, 1), iv(2, 3)]);
    }

    fn small_rational() -> impl Strategy<Value = Rational> {
        (-1000i64..1000, 1i64..50).prop_map(|(n, d)| q(n, d))
    }

    fn interval_with_member() -> impl Strategy<Value = (RationalInterval, Rational)> {
        (small_rational(), small_rational(), 0u32..=16).prop_map(|(a, b, t)| {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let member = &lo + (&hi - &lo) * q(t as i64, 16);
            (RationalInterval::new(lo, hi).unwrap(), member)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn operations_contain_pointwise_results((a, x) in interval_with_member(), (b, y) in interval_with_member()) {
            prop_assert!(a.add(&b).contains(&(&x + &y)));
            prop_assert!(a.sub(&b).contains(&(&x - &y)));
            prop_assert!(a.mul(&b).contains(&(&x * &y)));
            if let Ok(d) = a.div(&b) {
                prop_assert!(d.contains(&(&x / &y)));
            } else {
                prop_assert!(b.contains_zero());
            }
        }

        #[test]
        fn inclusion_monotone((a, _) in interval_with_member(), (b, _) in interval_with_member(), grow in small_rational()) {
            let r = grow.abs();
            let (a2, b2) = (a.inflate(&r), b.inflate(&r));
            prop_assert!(a.add(&b).is_subset_of(&a2.add(&b2)));
            prop_assert!(a.sub(&b).is_subset_of(&a2.sub(&b2)));
            prop_assert!(a.mul(&b).is_subset_of(&a2.mul(&b2)));
            if let (Ok(d), Ok(d2)) = (a.div(&b), a2.div(&b2)) {
                prop_assert!(d.is_subset_of(&d2));
            }
        }
    }
}
