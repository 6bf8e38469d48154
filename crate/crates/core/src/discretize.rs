//! Zero-order-hold discretization `G(z) = (1 - z^-1) Z{ L^-1{ G(s)/s } }`.
//!
//! The plant is realized in controllable canonical form, the augmented
//! exponential `exp([[A, B], [0, 0]] T)` yields `(Ad, Bd)`, and
//! `C (zI - Ad)^-1 Bd + D` is expanded with the Faddeev-LeVerrier
//! recursion. Everything runs in double-double arithmetic; coefficients are
//! finally snapped to nearby simple rationals.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use twofloat::TwoFloat;

use crate::rational::{from_twofloat, snap_continued_fraction, to_f64, to_twofloat, Rational};
use crate::transfer::{Poly, TransferError, TransferFunction};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiscretizeError {
    #[error("transfer function is improper (numerator degree {num} > denominator degree {den})")]
    ImproperTransferFunction { num: usize, den: usize },
    #[error("sample time must be positive")]
    NonpositiveSampleTime,
    #[error("denominator is the zero polynomial")]
    ZeroDenominator,
    #[error("discretization produced a non-finite coefficient")]
    NonFinite,
    #[error(transparent)]
    Transfer(#[from] TransferError),
}

/// Continuous plant `num(s) / den(s)` sampled every `sample_time` seconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinuousTF {
    pub num: Poly,
    pub den: Poly,
    pub sample_time: Rational,
}

impl ContinuousTF {
    pub fn new(num: Poly, den: Poly, sample_time: Rational) -> Result<Self, DiscretizeError> {
        if den.is_zero() {
            return Err(DiscretizeError::ZeroDenominator);
        }
        if !sample_time.is_positive() {
            return Err(DiscretizeError::NonpositiveSampleTime);
        }
        let (num, den) = (num.normalized(), den.normalized());
        if !num.is_zero() && num.degree() > den.degree() {
            return Err(DiscretizeError::ImproperTransferFunction {
                num: num.degree(),
                den: den.degree(),
            });
        }
        Ok(Self { num, den, sample_time })
    }
}

/// Square matrix of double-double reals, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct DdMatrix {
    n: usize,
    data: Vec<TwoFloat>,
}

impl DdMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![TwoFloat::from(0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = TwoFloat::from(1.0);
        }
        m
    }

    /// # Panics
    /// If the rows do not form a square matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = TwoFloat::from(*v);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)].hi() + self[(i, j)].lo()).collect())
            .collect()
    }

    fn scaled(&self, k: TwoFloat) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| *v * k).collect(),
        }
    }

    fn plus(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a + *b).collect(),
        }
    }

    fn times(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == TwoFloat::from(0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    fn trace(&self) -> TwoFloat {
        (0..self.n).fold(TwoFloat::from(0.0), |acc, i| acc + self[(i, i)])
    }

    /// Maximum absolute row sum.
    fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)].hi().abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for DdMatrix {
    type Output = TwoFloat;

    fn index(&self, (i, j): (usize, usize)) -> &TwoFloat {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DdMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut TwoFloat {
        &mut self.data[i * self.n + j]
    }
}

/// `exp(A t)` by scaling and squaring with a truncated Taylor series.
pub fn matrix_exp(a: &DdMatrix, t: TwoFloat) -> DdMatrix {
    let n = a.dim();
    let at = a.scaled(t);
    let norm = at.norm_inf();
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
    }
    let m = at.scaled(TwoFloat::from(0.5f64.powi(squarings as i32)));
    let mut sum = DdMatrix::identity(n);
    let mut term = DdMatrix::identity(n);
    for k in 1..=60 {
        term = term.times(&m).scaled(TwoFloat::from(1.0) / TwoFloat::from(k as f64));
        sum = sum.plus(&term);
        if term.norm_inf() < 1e-36 * sum.norm_inf().max(1.0) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.times(&sum);
    }
    sum
}

/// Continued-fraction tolerance used when turning double-double results
/// back into rationals.
pub fn snap_tolerance() -> Rational {
    Rational::new(1.into(), num_traits::pow(num_bigint::BigInt::from(10), 24))
}

/// Exact ZOH pulse transfer function of `g`, denominator monic.
pub fn zoh_discretize(g: &ContinuousTF) -> Result<TransferFunction, DiscretizeError> {
    let den = g.den.normalized();
    let n = den.degree();
    let lead = den.leading().clone();
    let den = den.scale(&lead.recip());
    let num = g.num.scale(&lead.recip()).padded(n + 1);
    if n == 0 {
        return Ok(TransferFunction::new(num.normalized(), Poly::one())?);
    }
    warn_on_fast_poles(&den, &g.sample_time);
    let d = num.coeffs()[0].clone();
    // strictly proper part c_1 s^(n-1) + ... + c_n
    let rest = num.sub(&den.scale(&d));
    let c: Vec<TwoFloat> = rest.coeffs()[1..].iter().map(to_twofloat).collect();
    let mut aug = DdMatrix::zeros(n + 1);
    for j in 0..n {
        aug[(0, j)] = -to_twofloat(&den.coeffs()[j + 1]);
    }
    for i in 1..n {
        aug[(i, i - 1)] = TwoFloat::from(1.0);
    }
    aug[(0, n)] = TwoFloat::from(1.0);
    let e = matrix_exp(&aug, to_twofloat(&g.sample_time));
    let mut ad = DdMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            ad[(i, j)] = e[(i, j)];
        }
    }
    let bd: Vec<TwoFloat> = (0..n).map(|i| e[(i, n)]).collect();
    let (char_coeffs, adjugate) = faddeev_leverrier(&ad);
    // numerator: sum_k (C M_k Bd) z^(n-1-k) + D det(zI - Ad)
    let d_tf = to_twofloat(&d);
    let mut z_num = vec![TwoFloat::from(0.0); n + 1];
    for (k, mk) in adjugate.iter().enumerate() {
        let mut acc = TwoFloat::from(0.0);
        for i in 0..n {
            for j in 0..n {
                acc += c[i] * mk[(i, j)] * bd[j];
            }
        }
        z_num[k + 1] = acc;
    }
    for (k, ck) in char_coeffs.iter().enumerate() {
        z_num[k] += d_tf * *ck;
    }
    let tol = snap_tolerance();
    let snap = |v: &TwoFloat| -> Result<Rational, DiscretizeError> {
        let r = from_twofloat(*v).ok_or(DiscretizeError::NonFinite)?;
        Ok(snap_continued_fraction(&r, &tol))
    };
    let num = Poly::new(z_num.iter().map(snap).collect::<Result<_, _>>()?);
    let den = Poly::new(char_coeffs.iter().map(snap).collect::<Result<_, _>>()?);
    Ok(TransferFunction::new(num, den)?)
}

/// Characteristic polynomial coefficients (monic, descending) and the
/// matrices `M_k` with `adj(zI - A) = sum_k M_k z^(n-1-k)`.
fn faddeev_leverrier(a: &DdMatrix) -> (Vec<TwoFloat>, Vec<DdMatrix>) {
    let n = a.dim();
    let mut coeffs = vec![TwoFloat::from(1.0)];
    let mut ms = vec![DdMatrix::identity(n)];
    for k in 1..=n {
        let am = a.times(ms.last().expect("nonempty"));
        let ck = -am.trace() / TwoFloat::from(k as f64);
        coeffs.push(ck);
        if k < n {
            ms.push(am.plus(&DdMatrix::identity(n).scaled(ck)));
        }
    }
    (coeffs, ms)
}

fn warn_on_fast_poles(den: &Poly, sample_time: &Rational) {
    let t = to_f64(sample_time);
    for p in den.roots() {
        if p.norm() * t > std::f64::consts::PI {
            log::warn!(
                "continuous pole {:.6}{:+.6}i times the sample time exceeds pi; the sampling rate may be too low",
                p.re,
                p.im
            );
        }
    }
}

/// DC gain `G(0)` of a continuous plant, or `None` with a pole at the origin.
pub fn continuous_dc_gain(g: &ContinuousTF) -> Option<Rational> {
    let den0 = g.den.eval(&Rational::zero());
    if den0.is_zero() {
        return None;
    }
    Some(g.num.eval(&Rational::zero()) / den0)
}
