//! Jury's criterion: are all roots of `S(z) = a_0 z^N + ... + a_N` strictly
//! inside the unit circle?
//!
//! With `a_0 > 0` (negate otherwise) the polynomial is Schur stable iff
//!
//! * R1: `S(1) > 0`
//! * R2: `(-1)^N S(-1) > 0`
//! * R3: `a_0 - |a_N| > 0`
//! * R4: every pivot of the table reduction is positive. Starting from
//!   `r = a`, each step maps `r_i <- r_i - (r_k / r_0) r_{k-i}` for
//!   `i < k` and drops the last entry; `k` runs from `N` down to 2 and each
//!   new `r_0` is a pivot.
//!
//! The same conditions are evaluated over exact rationals, over `<Ip,Fp>`
//! fixed point (fast, unsound) and over rational intervals (sound for a
//! whole family).

use std::fmt;

use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::fixedpoint::FixedPointValue;
use crate::interval::{IntervalPoly, RationalInterval};
use crate::rational::Rational;
use crate::roots::max_root_modulus;
use crate::transfer::Poly;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JuryStatus {
    Stable,
    Unstable,
    Unknown,
}

impl fmt::Display for JuryStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JuryStatus::Stable => "stable",
            JuryStatus::Unstable => "unstable",
            JuryStatus::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JuryCondition {
    /// Zero polynomial or vanishing leading coefficient.
    Degenerate,
    R1,
    R2,
    R3,
    /// Pivot of the given reduction step (1-based).
    R4 { step: usize },
}

impl fmt::Display for JuryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JuryCondition::Degenerate => f.write_str("degenerate"),
            JuryCondition::R1 => f.write_str("R1"),
            JuryCondition::R2 => f.write_str("R2"),
            JuryCondition::R3 => f.write_str("R3"),
            JuryCondition::R4 { step } => write!(f, "R4[{step}]"),
        }
    }
}

/// Which form of the magnitude condition R3 to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum R3Convention {
    /// `|a_N| < a_0`.
    #[default]
    Standard,
    /// `|a_0| < a_N`, kept for auditing only.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JuryOptions {
    pub r3: R3Convention,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JuryVerdict {
    pub status: JuryStatus,
    /// First condition that failed (or could not be decided).
    pub violated: Option<JuryCondition>,
    /// Smallest slack over the evaluated conditions; for intervals, the
    /// smallest lower bound.
    pub margin: Rational,
}

impl JuryVerdict {
    pub fn is_stable(&self) -> bool {
        self.status == JuryStatus::Stable
    }

    fn degenerate() -> Self {
        Self {
            status: JuryStatus::Unstable,
            violated: Some(JuryCondition::Degenerate),
            margin: Rational::zero(),
        }
    }
}

/// Rows generated by the reduction, starting with the (sign-normalized)
/// coefficients themselves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JuryTable {
    pub rows: Vec<Vec<Rational>>,
}

fn reduce(r: &[Rational]) -> Vec<Rational> {
    let k = r.len() - 1;
    let ratio = &r[k] / &r[0];
    (0..k).map(|i| &r[i] - &ratio * &r[k - i]).collect()
}

/// Build the reduction table, stopping after the first non-positive pivot.
/// `None` for a degenerate polynomial.
pub fn jury_table(s: &Poly) -> Option<JuryTable> {
    let a = sign_normalized(s)?;
    let mut rows = vec![a];
    while rows.last().expect("nonempty").len() > 2 {
        let last = rows.last().expect("nonempty");
        if !last[0].is_positive() {
            break;
        }
        rows.push(reduce(last));
    }
    Some(JuryTable { rows })
}

fn sign_normalized(s: &Poly) -> Option<Vec<Rational>> {
    if s.is_zero() || s.leading().is_zero() {
        return None;
    }
    if s.leading().is_negative() {
        Some(s.neg().coeffs().to_vec())
    } else {
        Some(s.coeffs().to_vec())
    }
}

fn alternating_sum<T: Clone>(a: &[T], add: impl Fn(&T, &T) -> T, neg: impl Fn(&T) -> T) -> T {
    // sum of a_i (-1)^i
    let mut acc = a[0].clone();
    for (i, c) in a.iter().enumerate().skip(1) {
        acc = if i % 2 == 0 { add(&acc, c) } else { add(&acc, &neg(c)) };
    }
    acc
}

/// Exact Jury test with the standard R3 convention.
pub fn jury_stable(s: &Poly) -> JuryVerdict {
    jury_stable_with(s, JuryOptions::default())
}

pub fn jury_stable_with(s: &Poly, options: JuryOptions) -> JuryVerdict {
    let Some(table) = jury_table(s) else {
        return JuryVerdict::degenerate();
    };
    let a = &table.rows[0];
    let n = a.len() - 1;
    if n == 0 {
        return JuryVerdict {
            status: JuryStatus::Stable,
            violated: None,
            margin: a[0].clone(),
        };
    }
    let r1 = a.iter().fold(Rational::zero(), |acc, c| acc + c);
    let r2 = alternating_sum(a, |x, y| x + y, |x| -x);
    let r3 = match options.r3 {
        R3Convention::Standard => &a[0] - a[n].abs(),
        R3Convention::AsPrinted => &a[n] - a[0].abs(),
    };
    let mut slacks = vec![(JuryCondition::R1, r1), (JuryCondition::R2, r2), (JuryCondition::R3, r3)];
    for (step, row) in table.rows.iter().enumerate().skip(1) {
        slacks.push((JuryCondition::R4 { step }, row[0].clone()));
    }
    let violated = slacks.iter().find(|(_, v)| !v.is_positive()).map(|(c, _)| *c);
    let margin = slacks.into_iter().map(|(_, v)| v).min().expect("at least three conditions");
    JuryVerdict {
        status: if violated.is_some() {
            JuryStatus::Unstable
        } else {
            JuryStatus::Stable
        },
        violated,
        margin,
    }
}

/// Result of the fixed-point Jury evaluation used to guide search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedJury {
    pub status: JuryStatus,
    /// Zero when stable. Each evaluated condition contributes
    /// `v / (1 + v)` with `v` its violation relative to `|a_0|`, and every
    /// condition that could not be reached contributes 1.
    pub cost: f64,
}

/// Jury test in `<Ip,Fp>` fixed point with truncating arithmetic. Overflow
/// anywhere counts as a failure of every remaining condition.
pub fn jury_stable_fixed(s: &[FixedPointValue]) -> FixedJury {
    let n = s.len().saturating_sub(1);
    let total = (n + 2).max(3) as f64;
    let unstable = |cost: f64| FixedJury {
        status: JuryStatus::Unstable,
        cost,
    };
    if s.is_empty() || s[0].is_zero() {
        return unstable(total + 1.0);
    }
    let mut a: Vec<FixedPointValue> = if s[0].signum() < 0 {
        s.iter().map(FixedPointValue::checked_neg).collect()
    } else {
        s.to_vec()
    };
    if n == 0 {
        return FixedJury {
            status: JuryStatus::Stable,
            cost: 0.0,
        };
    }
    let scale = a[0].to_f64();
    let mut cost = 0.0;
    let mut stable = true;
    let mut remaining = total;
    let charge = |slack: &FixedPointValue, cost: &mut f64, remaining: &mut f64| {
        *remaining -= 1.0;
        if slack.signum() <= 0 {
            let v = -slack.to_f64() / scale;
            // a zero slack still fails the strict inequality
            *cost += v / (1.0 + v) + 1e-12;
            false
        } else {
            true
        }
    };
    let sums = (|| {
        let mut r1 = FixedPointValue::zero(a[0].format());
        let mut r2 = r1;
        for (i, c) in a.iter().enumerate() {
            r1 = r1.checked_add(c).ok()?;
            r2 = if i % 2 == 0 { r2.checked_add(c).ok()? } else { r2.checked_sub(c).ok()? };
        }
        let an = a[n];
        let r3 = a[0].checked_sub(&if an.signum() < 0 { an.checked_neg() } else { an }).ok()?;
        Some([r1, r2, r3])
    })();
    let Some(sums) = sums else {
        return unstable(total);
    };
    for slack in &sums {
        stable &= charge(slack, &mut cost, &mut remaining);
    }
    while a.len() > 2 {
        let k = a.len() - 1;
        let Ok(ratio) = a[k].checked_div(&a[0]) else {
            return unstable(cost + remaining);
        };
        let mut next = Vec::with_capacity(k);
        for i in 0..k {
            match ratio.checked_mul(&a[k - i]).and_then(|t| a[i].checked_sub(&t)) {
                Ok(v) => next.push(v),
                Err(_) => return unstable(cost + remaining),
            }
        }
        a = next;
        let ok = charge(&a[0], &mut cost, &mut remaining);
        stable &= ok;
        if !ok {
            return unstable(cost + remaining);
        }
    }
    FixedJury {
        status: if stable {
            JuryStatus::Stable
        } else {
            JuryStatus::Unstable
        },
        cost,
    }
}

/// Jury test over a polynomial with interval coefficients.
///
/// Stable means every member is stable, Unstable means every member is
/// unstable; anything else is Unknown.
pub fn jury_stable_interval(s: &IntervalPoly) -> JuryVerdict {
    jury_stable_interval_with(s, JuryOptions::default())
}

pub fn jury_stable_interval_with(s: &IntervalPoly, options: JuryOptions) -> JuryVerdict {
    interval_run(s, options).verdict
}

/// Search cost of an interval polynomial, scored like [`jury_stable_fixed`]
/// on the lower bounds of the slacks. Zero only when Stable.
pub fn jury_interval_cost(s: &IntervalPoly) -> FixedJury {
    let run = interval_run(s, JuryOptions::default());
    let status = run.verdict.status;
    if status == JuryStatus::Stable {
        return FixedJury { status, cost: 0.0 };
    }
    let Some(scale) = run.scale.and_then(|x| x.to_f64()).filter(|x| *x > 0.0) else {
        return FixedJury {
            status,
            cost: run.total as f64 + 1.0,
        };
    };
    let mut cost = (run.total - run.lows.len()) as f64;
    for lo in &run.lows {
        if !lo.is_positive() {
            let v = -lo.to_f64().unwrap_or(f64::MAX) / scale;
            cost += v / (1.0 + v) + 1e-12;
        }
    }
    FixedJury { status, cost }
}

struct IntervalRun {
    verdict: JuryVerdict,
    /// Lower bounds of the evaluated slacks.
    lows: Vec<Rational>,
    /// Number of conditions for this degree.
    total: usize,
    /// Smallest magnitude of the leading coefficient, when it excludes zero.
    scale: Option<Rational>,
}

fn interval_run(s: &IntervalPoly, options: JuryOptions) -> IntervalRun {
    let n = s.nominal_degree();
    let total = (n + 2).max(3);
    let lead = &s.coeffs()[0];
    let early = |verdict: JuryVerdict| IntervalRun {
        verdict,
        lows: Vec::new(),
        total,
        scale: None,
    };
    if lead.is_point() && lead.lo().is_zero() {
        return early(JuryVerdict::degenerate());
    }
    if lead.contains_zero() {
        return early(JuryVerdict {
            status: JuryStatus::Unknown,
            violated: Some(JuryCondition::Degenerate),
            margin: lead.lo().clone().min(-lead.hi().clone()),
        });
    }
    let mut a: Vec<RationalInterval> = if lead.is_negative() {
        s.neg().coeffs().to_vec()
    } else {
        s.coeffs().to_vec()
    };
    let scale = Some(a[0].lo().clone());
    if n == 0 {
        return IntervalRun {
            verdict: JuryVerdict {
                status: JuryStatus::Stable,
                violated: None,
                margin: a[0].lo().clone(),
            },
            lows: Vec::new(),
            total,
            scale,
        };
    }
    let r1 = a.iter().fold(RationalInterval::zero(), |acc, c| acc.add(c));
    let r2 = alternating_sum(&a, RationalInterval::add, RationalInterval::neg);
    let r3 = match options.r3 {
        R3Convention::Standard => a[0].sub(&a[n].abs()),
        R3Convention::AsPrinted => a[n].sub(&a[0].abs()),
    };
    let mut lows = Vec::new();
    let mut undecided: Option<JuryCondition> = None;
    let finish = |status, violated, lows: Vec<Rational>| {
        let margin = lows.iter().min().cloned().expect("R1 evaluated");
        IntervalRun {
            verdict: JuryVerdict {
                status,
                violated,
                margin,
            },
            lows,
            total,
            scale: scale.clone(),
        }
    };
    let conditions = [(JuryCondition::R1, r1), (JuryCondition::R2, r2), (JuryCondition::R3, r3)];
    for (cond, slack) in conditions {
        lows.push(slack.lo().clone());
        if !slack.hi().is_positive() {
            return finish(JuryStatus::Unstable, Some(cond), lows);
        }
        if !slack.is_positive() && undecided.is_none() {
            undecided = Some(cond);
        }
    }
    let mut step = 0;
    while a.len() > 2 {
        step += 1;
        let k = a.len() - 1;
        let Ok(ratio) = a[k].div(&a[0]) else {
            // the previous pivot straddles zero
            let cond = undecided.or(Some(JuryCondition::R4 { step: step - 1 }));
            return finish(JuryStatus::Unknown, cond, lows);
        };
        a = (0..k).map(|i| a[i].sub(&ratio.mul(&a[k - i]))).collect();
        let cond = JuryCondition::R4 { step };
        lows.push(a[0].lo().clone());
        if !a[0].hi().is_positive() {
            return finish(JuryStatus::Unstable, Some(cond), lows);
        }
        if !a[0].is_positive() && undecided.is_none() {
            undecided = Some(cond);
        }
    }
    match undecided {
        None => finish(JuryStatus::Stable, None, lows),
        Some(cond) => finish(JuryStatus::Unknown, Some(cond), lows),
    }
}

/// Largest root modulus from companion-matrix eigenvalues (test oracle).
pub fn root_oracle(s: &Poly) -> f64 {
    max_root_modulus(&s.to_f64_vec())
}

/// Margin as a float relative to the leading coefficient; convenient for
/// reports.
pub fn relative_margin(verdict: &JuryVerdict, s: &Poly) -> f64 {
    let lead = s.normalized().leading().abs();
    if lead.is_zero() {
        return 0.0;
    }
    (&verdict.margin / lead).to_f64().unwrap_or(0.0)
}
