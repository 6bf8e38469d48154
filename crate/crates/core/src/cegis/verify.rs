//! The two verification stages and counterexample extraction.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::interval::{interval_char_poly, split_packed, RationalInterval};
use crate::rational::{pow2, Rational};
use crate::stability::{jury_stable, jury_stable_interval, root_oracle, JuryStatus, JuryVerdict};
use crate::transfer::{
    cancellation_on_or_outside_unit_circle, char_poly, Controller, PlantFamily, TransferFunction,
    DEFAULT_CANCELLATION_TOL,
};

/// Maximum bisection depth when intervals are too coarse.
pub const MAX_SUBDIVISION_DEPTH: usize = 8;
/// Vertex enumeration is skipped beyond this many free coordinates.
const MAX_VERTEX_DIMS: usize = 12;
const DESCENT_SWEEPS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verification {
    Ok,
    Counterexample(TransferFunction),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionFailed;

/// Verdict for a family, possibly assembled from several sub-boxes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub verdict: JuryVerdict,
    /// Number of boxes the family was split into (1 when no split was needed).
    pub boxes: usize,
}

impl Certificate {
    pub fn is_stable(&self) -> bool {
        self.verdict.is_stable()
    }
}

fn interval_verdict(candidate: &Controller, bx: &[RationalInterval], num_len: usize) -> JuryVerdict {
    let (num, den) = split_packed(bx, num_len);
    jury_stable_interval(&interval_char_poly(candidate, &num, &den))
}

/// Exact verdict for one plant; an invalid plant is never a counterexample.
fn exact_verdict(candidate: &Controller, family: &PlantFamily, packed: &[Rational]) -> Option<(TransferFunction, JuryVerdict)> {
    let plant = family.plant_from_packed(packed).ok()?;
    let verdict = match char_poly(candidate, &plant) {
        Ok(s) => jury_stable(&s),
        Err(_) => JuryVerdict {
            status: JuryStatus::Unstable,
            violated: Some(crate::stability::JuryCondition::Degenerate),
            margin: Rational::zero(),
        },
    };
    Some((plant, verdict))
}

/// Margin relative to the leading coefficient of `S`, for comparing plants.
fn relative_margin(candidate: &Controller, plant: &TransferFunction, verdict: &JuryVerdict) -> Rational {
    match char_poly(candidate, plant) {
        Ok(s) if !s.leading().is_zero() => &verdict.margin / s.leading().abs(),
        _ => Rational::zero(),
    }
}

/// Distinct corner points of a box, in binary counting order.
fn vertices(bx: &[RationalInterval]) -> Option<Vec<Vec<Rational>>> {
    let free: Vec<usize> = (0..bx.len()).filter(|i| !bx[*i].is_point()).collect();
    if free.len() > MAX_VERTEX_DIMS {
        return None;
    }
    Some(
        (0..1usize << free.len())
            .map(|mask| {
                let mut v: Vec<Rational> = bx.iter().map(|iv| iv.lo().clone()).collect();
                for (bit, &i) in free.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        v[i] = bx[i].hi().clone();
                    }
                }
                v
            })
            .collect(),
    )
}

fn grid_scale(bits: u32) -> Rational {
    Rational::from_integer(pow2(bits))
}

/// Grid points `lo, hi`, the midpoint and a few interior points of one coordinate.
fn coordinate_probes(iv: &RationalInterval, bits: u32) -> Vec<Rational> {
    let scale = grid_scale(bits);
    let lo = (iv.lo() * &scale).ceil().to_integer();
    let hi = (iv.hi() * &scale).floor().to_integer();
    if lo > hi {
        return Vec::new();
    }
    let span = &hi - &lo;
    let mut raws = vec![lo.clone(), hi.clone()];
    for k in 1..8 {
        raws.push(&lo + &span * BigInt::from(k) / BigInt::from(8));
    }
    raws.sort();
    raws.dedup();
    raws.into_iter().map(|r| Rational::new(r, pow2(bits))).collect()
}

/// Stage one: is the closed loop stable for every grid plant of the family?
pub fn verify_uncertainty(candidate: &Controller, family: &PlantFamily) -> Result<Verification, ExtractionFailed> {
    let bx = family.grid_box();
    let num_len = family.num_len();
    if interval_verdict(candidate, &bx, num_len).is_stable() {
        return Ok(Verification::Ok);
    }
    let bits = family.plant_format().fraction_bits();

    // vertices, remembering the one with the smallest relative margin
    let mut best: Option<(Rational, Vec<Rational>)> = None;
    if let Some(corners) = vertices(&bx) {
        for v in corners {
            let Some((plant, verdict)) = exact_verdict(candidate, family, &v) else { continue };
            if verdict.status != JuryStatus::Stable {
                return Ok(Verification::Counterexample(plant));
            }
            let m = relative_margin(candidate, &plant, &verdict);
            if best.as_ref().is_none_or(|(b, _)| m < *b) {
                best = Some((m, v));
            }
        }
    }

    // coordinate descent on the relative margin
    let mut point = match best {
        Some((_, v)) => v,
        None => bx.iter().map(|iv| snap_down(&iv.midpoint(), bits)).collect(),
    };
    let mut current = exact_verdict(candidate, family, &point)
        .map(|(p, v)| relative_margin(candidate, &p, &v))
        .unwrap_or_else(Rational::zero);
    for _ in 0..DESCENT_SWEEPS {
        let mut improved = false;
        for i in 0..bx.len() {
            for probe in coordinate_probes(&bx[i], bits) {
                let mut trial = point.clone();
                trial[i] = probe;
                let Some((plant, verdict)) = exact_verdict(candidate, family, &trial) else { continue };
                if verdict.status != JuryStatus::Stable {
                    return Ok(Verification::Counterexample(plant));
                }
                let m = relative_margin(candidate, &plant, &verdict);
                if m < current {
                    current = m;
                    point = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }

    // subdivision backstop
    match subdivide(candidate, family, &bx, 0) {
        Subdivision::Counterexample(plant) => Ok(Verification::Counterexample(plant)),
        Subdivision::Stable => Ok(Verification::Ok),
        Subdivision::Unresolved => Err(ExtractionFailed),
    }
}

fn snap_down(x: &Rational, bits: u32) -> Rational {
    let scale = grid_scale(bits);
    (x * &scale).floor() / scale
}

enum Subdivision {
    Stable,
    Counterexample(TransferFunction),
    Unresolved,
}

/// Split along the widest coordinate at a grid point.
fn split_box(bx: &[RationalInterval], bits: u32) -> Option<(Vec<RationalInterval>, Vec<RationalInterval>)> {
    let (i, iv) = bx.iter().enumerate().max_by(|a, b| a.1.width().cmp(&b.1.width()))?;
    if iv.is_point() {
        return None;
    }
    let ulp = crate::rational::grid_step(bits);
    let mut mid = snap_down(&iv.midpoint(), bits);
    if &mid >= iv.hi() {
        mid = iv.hi() - &ulp;
    }
    if &mid < iv.lo() {
        mid = iv.lo().clone();
    }
    let mut left = bx.to_vec();
    let mut right = bx.to_vec();
    left[i] = RationalInterval::new(iv.lo().clone(), mid.clone()).ok()?;
    right[i] = RationalInterval::new(&mid + &ulp, iv.hi().clone()).ok()?;
    Some((left, right))
}

fn at_most_one_ulp(bx: &[RationalInterval], bits: u32) -> bool {
    let ulp = crate::rational::grid_step(bits);
    bx.iter().all(|iv| iv.width() <= ulp)
}

fn subdivide(candidate: &Controller, family: &PlantFamily, bx: &[RationalInterval], depth: usize) -> Subdivision {
    let bits = family.plant_format().fraction_bits();
    let verdict = interval_verdict(candidate, bx, family.num_len());
    if verdict.is_stable() {
        return Subdivision::Stable;
    }
    if verdict.status == JuryStatus::Unstable || at_most_one_ulp(bx, bits) {
        // every grid point of a one-ulp box is a vertex
        if let Some(corners) = vertices(bx) {
            for v in corners {
                if let Some((plant, verdict)) = exact_verdict(candidate, family, &v) {
                    if verdict.status != JuryStatus::Stable {
                        return Subdivision::Counterexample(plant);
                    }
                }
            }
            if at_most_one_ulp(bx, bits) {
                return Subdivision::Stable;
            }
        }
    }
    let center: Vec<Rational> = bx.iter().map(|iv| snap_down(&iv.midpoint(), bits)).collect();
    if let Some((plant, v)) = exact_verdict(candidate, family, &center) {
        if v.status != JuryStatus::Stable {
            return Subdivision::Counterexample(plant);
        }
    }
    if depth >= MAX_SUBDIVISION_DEPTH {
        return Subdivision::Unresolved;
    }
    let Some((left, right)) = split_box(bx, bits) else {
        return Subdivision::Unresolved;
    };
    let mut unresolved = false;
    for half in [left, right] {
        match subdivide(candidate, family, &half, depth + 1) {
            Subdivision::Stable => {}
            Subdivision::Counterexample(p) => return Subdivision::Counterexample(p),
            Subdivision::Unresolved => unresolved = true,
        }
    }
    if unresolved {
        Subdivision::Unresolved
    } else {
        Subdivision::Stable
    }
}

/// Enclosure of the family including rounding onto the plant grid.
pub fn precision_box(family: &PlantFamily) -> Vec<RationalInterval> {
    let bits = Some(family.plant_format().fraction_bits());
    family
        .nominal()
        .pack_coefficients()
        .iter()
        .zip(family.delta())
        .map(|(c, d)| crate::interval::coefficient_enclosure(c, d, bits))
        .collect()
}

/// Stage two: interval Jury over the rounding-inflated family, bisecting
/// when a single box is too coarse.
pub fn certify(candidate: &Controller, family: &PlantFamily) -> Certificate {
    let bx = precision_box(family);
    let whole = interval_verdict(candidate, &bx, family.num_len());
    if whole.status != JuryStatus::Unknown {
        return Certificate {
            verdict: whole,
            boxes: 1,
        };
    }
    let mut leaves = Vec::new();
    if !bisect_all(candidate, family, bx, 0, &mut leaves) {
        return Certificate { verdict: whole, boxes: 1 };
    }
    let margin = leaves.iter().map(|v| v.margin.clone()).min().expect("at least two leaves");
    Certificate {
        verdict: JuryVerdict {
            status: JuryStatus::Stable,
            violated: None,
            margin,
        },
        boxes: leaves.len(),
    }
}

fn bisect_all(
    candidate: &Controller,
    family: &PlantFamily,
    bx: Vec<RationalInterval>,
    depth: usize,
    leaves: &mut Vec<JuryVerdict>,
) -> bool {
    let verdict = interval_verdict(candidate, &bx, family.num_len());
    match verdict.status {
        JuryStatus::Stable => {
            leaves.push(verdict);
            true
        }
        JuryStatus::Unstable => false,
        JuryStatus::Unknown => {
            if depth >= MAX_SUBDIVISION_DEPTH {
                return false;
            }
            let Some((i, _)) = bx.iter().enumerate().max_by(|a, b| a.1.width().cmp(&b.1.width())) else {
                return false;
            };
            let (l, r) = bx[i].bisect();
            let mut left = bx.clone();
            let mut right = bx;
            left[i] = l;
            right[i] = r;
            bisect_all(candidate, family, left, depth + 1, leaves)
                && bisect_all(candidate, family, right, depth + 1, leaves)
        }
    }
}

pub fn verify_precision(candidate: &Controller, family: &PlantFamily) -> bool {
    certify(candidate, family).is_stable()
}

/// Summary of sampled family members checked against the root oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub sampled: usize,
    pub oracle_stable: usize,
    pub cancellations: usize,
    pub max_root_modulus: f64,
}

impl SpotCheck {
    pub fn all_passed(&self) -> bool {
        self.oracle_stable == self.sampled && self.cancellations == 0
    }
}

/// Vertices of the grid box first, then uniform random grid points.
pub fn sample_family(family: &PlantFamily, count: usize, seed: u64) -> Vec<TransferFunction> {
    let bx = family.grid_box();
    let bits = family.plant_format().fraction_bits();
    let mut out: Vec<TransferFunction> = vertices(&bx)
        .unwrap_or_default()
        .into_iter()
        .filter_map(|v| family.plant_from_packed(&v).ok())
        .take(count)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = grid_scale(bits);
    let ranges: Vec<(i128, i128)> = bx
        .iter()
        .map(|iv| {
            let lo = (iv.lo() * &scale).ceil().to_integer().to_i128().unwrap_or(0);
            let hi = (iv.hi() * &scale).floor().to_integer().to_i128().unwrap_or(0);
            (lo, hi.max(lo))
        })
        .collect();
    let mut attempts = 0;
    while out.len() < count && attempts < 10 * count.max(1) {
        attempts += 1;
        let packed: Vec<Rational> = ranges
            .iter()
            .map(|(lo, hi)| Rational::new(BigInt::from(rng.gen_range(*lo..=*hi)), pow2(bits)))
            .collect();
        if let Ok(p) = family.plant_from_packed(&packed) {
            out.push(p);
        }
    }
    out
}

pub fn spot_check(candidate: &Controller, family: &PlantFamily, count: usize, seed: u64) -> SpotCheck {
    let plants = sample_family(family, count, seed);
    let mut check = SpotCheck {
        sampled: plants.len(),
        oracle_stable: 0,
        cancellations: 0,
        max_root_modulus: 0.0,
    };
    for p in &plants {
        let rho = char_poly(candidate, p).map(|s| root_oracle(&s)).unwrap_or(f64::INFINITY);
        check.max_root_modulus = check.max_root_modulus.max(rho);
        if rho < 1.0 {
            check.oracle_stable += 1;
        }
        if cancellation_on_or_outside_unit_circle(candidate, p, DEFAULT_CANCELLATION_TOL) {
            check.cancellations += 1;
        }
    }
    check
}
