//! Seeded search over the controller coefficient grid.
//!
//! Small grids are enumerated exhaustively; larger ones are explored by hill
//! climbing with random restarts. Steps move one coefficient by a power of
//! two ulps and are accepted when the cost does not increase.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fixedpoint::{FixedPointFormat, FixedPointValue};
use crate::stability::{jury_stable_fixed, JuryStatus};
use crate::transfer::{Controller, TransferFunction};

/// Grids with at most this many points are enumerated.
pub const EXHAUSTIVE_LIMIT: u128 = 1 << 20;
/// Non-improving steps before a restart.
const STALE_LIMIT: usize = 600;

/// Evaluation of one candidate: a cost to descend and whether it is accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub cost: f64,
    pub accepted: bool,
}

impl Score {
    pub fn rejected() -> Self {
        Self {
            cost: f64::INFINITY,
            accepted: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchSpace {
    pub format: FixedPointFormat,
    pub num_len: usize,
    pub den_len: usize,
}

impl SearchSpace {
    pub fn dims(&self) -> usize {
        self.num_len + self.den_len
    }

    /// Number of coefficient vectors, saturating.
    pub fn grid_points(&self) -> u128 {
        let per = self.format.grid_size();
        (0..self.dims()).fold(1u128, |acc, _| acc.saturating_mul(per))
    }

    pub fn controller(&self, raws: &[i128]) -> Controller {
        Controller::from_raws(&raws[..self.num_len], &raws[self.num_len..], self.format)
            .expect("search keeps raws inside the format")
    }
}

/// Outcome of a search run.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub raws: Option<Vec<i128>>,
    pub evaluations: usize,
}

/// Find an accepted coefficient vector. `starts` are probed first, in order.
pub fn search(
    space: SearchSpace,
    starts: &[Vec<i128>],
    seed: u64,
    budget: usize,
    mut score: impl FnMut(&[i128]) -> Score,
) -> SearchResult {
    let mut evaluations = 0;
    for s in starts {
        if evaluations >= budget {
            return SearchResult { raws: None, evaluations };
        }
        evaluations += 1;
        if score(s).accepted {
            return SearchResult {
                raws: Some(s.clone()),
                evaluations,
            };
        }
    }
    if space.grid_points() <= EXHAUSTIVE_LIMIT {
        return enumerate(space, budget, evaluations, score);
    }
    hill_climb(space, starts.last().cloned(), seed, budget, evaluations, score)
}

fn enumerate(
    space: SearchSpace,
    budget: usize,
    mut evaluations: usize,
    mut score: impl FnMut(&[i128]) -> Score,
) -> SearchResult {
    let max = space.format.max_raw();
    let mut raws = vec![-max; space.dims()];
    loop {
        if evaluations >= budget {
            return SearchResult { raws: None, evaluations };
        }
        evaluations += 1;
        if score(&raws).accepted {
            return SearchResult {
                raws: Some(raws),
                evaluations,
            };
        }
        // odometer increment, last coordinate fastest
        let mut i = raws.len();
        loop {
            if i == 0 {
                return SearchResult { raws: None, evaluations };
            }
            i -= 1;
            if raws[i] < max {
                raws[i] += 1;
                break;
            }
            raws[i] = -max;
        }
    }
}

fn random_point(space: &SearchSpace, rng: &mut ChaCha8Rng) -> Vec<i128> {
    let bits = space.format.integer_bits() + space.format.fraction_bits();
    let max = space.format.max_raw();
    (0..space.dims())
        .map(|_| {
            // log-uniform magnitude so small and large gains are both tried
            let e = rng.gen_range(0..=bits);
            let span = (1i128 << e) - 1;
            let v = if span == 0 { 0 } else { rng.gen_range(-span..=span) };
            v.clamp(-max, max)
        })
        .collect()
}

fn hill_climb(
    space: SearchSpace,
    first: Option<Vec<i128>>,
    seed: u64,
    budget: usize,
    mut evaluations: usize,
    mut score: impl FnMut(&[i128]) -> Score,
) -> SearchResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits = space.format.integer_bits() + space.format.fraction_bits();
    let max = space.format.max_raw();
    let mut start = first;
    while evaluations < budget {
        let mut current = start.take().unwrap_or_else(|| random_point(&space, &mut rng));
        evaluations += 1;
        let s = score(&current);
        if s.accepted {
            return SearchResult {
                raws: Some(current),
                evaluations,
            };
        }
        let mut cost = s.cost;
        let mut stale = 0;
        while stale < STALE_LIMIT && evaluations < budget {
            let j = rng.gen_range(0..current.len());
            let step = 1i128 << rng.gen_range(0..bits);
            let sign = if rng.gen::<bool>() { 1 } else { -1 };
            let mut next = current.clone();
            next[j] = (next[j] + sign * step).clamp(-max, max);
            if next[j] == current[j] {
                stale += 1;
                continue;
            }
            evaluations += 1;
            let s = score(&next);
            if s.accepted {
                return SearchResult {
                    raws: Some(next),
                    evaluations,
                };
            }
            if s.cost < cost {
                stale = 0;
            } else {
                stale += 1;
            }
            if s.cost <= cost {
                cost = s.cost;
                current = next;
            }
        }
    }
    SearchResult { raws: None, evaluations }
}

/// A plant with coefficients on the `<Ip,Fp>` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPlant {
    num: Vec<FixedPointValue>,
    den: Vec<FixedPointValue>,
}

impl FixedPlant {
    /// Coefficients are truncated onto the grid (exact for grid plants).
    pub fn new(plant: &TransferFunction, format: FixedPointFormat) -> Option<Self> {
        let q = |c: &[crate::rational::Rational]| {
            crate::fixedpoint::quantize_poly(c, format, crate::fixedpoint::Rounding::Truncate).ok()
        };
        Some(Self {
            num: q(plant.num().coeffs())?,
            den: q(plant.den().coeffs())?,
        })
    }
}

fn mul_into(
    out: &mut [FixedPointValue],
    a: &[FixedPointValue],
    b: &[FixedPointValue],
) -> Result<(), crate::fixedpoint::FixedPointError> {
    // products aligned on the constant term
    let offset = out.len() - (a.len() + b.len() - 1);
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            let k = offset + i + j;
            out[k] = out[k].checked_add(&x.checked_mul(y)?)?;
        }
    }
    Ok(())
}

/// Fast fixed-point score of a controller against concrete plants: the sum
/// of per-plant Jury costs, accepted when every closed loop is stable.
pub fn fixed_point_score(space: &SearchSpace, raws: &[i128], plants: &[FixedPlant], plant_format: FixedPointFormat) -> Score {
    if plants.is_empty() {
        return Score {
            cost: 0.0,
            accepted: true,
        };
    }
    if raws[space.num_len] == 0 {
        return Score::rejected();
    }
    let shift = |r: &i128| FixedPointValue::from_raw(*r, space.format).and_then(|v| v.rescale(plant_format));
    let Ok(coeffs) = raws.iter().map(shift).collect::<Result<Vec<_>, _>>() else {
        return Score::rejected();
    };
    let (cn, cd) = coeffs.split_at(space.num_len);
    let mut cost = 0.0;
    let mut accepted = true;
    let zero = FixedPointValue::zero(plant_format);
    for p in plants {
        let len = (cn.len() + p.num.len()).max(cd.len() + p.den.len()) - 1;
        let mut s = vec![zero; len];
        if mul_into(&mut s, cn, &p.num).and_then(|_| mul_into(&mut s, cd, &p.den)).is_err() {
            return Score::rejected();
        }
        let j = jury_stable_fixed(&s);
        cost += j.cost;
        accepted &= j.status == JuryStatus::Stable;
    }
    Score { cost, accepted }
}
