use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SimulationError;
use crate::transfer::{Controller, Poly, TransferFunction};

/// Which transfer function the margins are read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarginLoop {
    /// Loop gain `C G`.
    Open,
    /// Reference-to-output map `C G / (1 + C G)`.
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// Infinite when the phase never crosses -180 degrees.
    pub gain_margin_db: f64,
    /// Infinite when the magnitude never crosses 1.
    pub phase_margin_deg: f64,
    /// rad/s
    pub phase_crossover: Option<f64>,
    /// rad/s
    pub gain_crossover: Option<f64>,
}

/// Number of logarithmically spaced frequencies.
const GRID_POINTS: usize = 20_000;
/// Decades below Nyquist covered by the grid.
const GRID_DECADES: f64 = 6.0;

struct Response {
    num: Poly,
    den: Poly,
    sample_time: f64,
    /// Denominator magnitudes below this count as a pole on the grid.
    pole_tol: f64,
}

impl Response {
    fn at(&self, w: f64) -> Option<Complex64> {
        let z = Complex64::from_polar(1.0, w * self.sample_time);
        let d = self.den.eval_complex(z);
        let v = self.num.eval_complex(z) / d;
        (d.norm() > self.pole_tol && v.is_finite()).then_some(v)
    }
}

/// Gain and phase margins of the chosen loop at sample time `sample_time`.
pub fn frequency_margins(
    controller: &Controller,
    plant: &TransferFunction,
    sample_time: f64,
    which: MarginLoop,
) -> Result<Margins, SimulationError> {
    let open_num = controller.num_poly().mul(plant.num());
    let open_den = controller.den_poly().mul(plant.den());
    let (num, den) = match which {
        MarginLoop::Open => (open_num, open_den),
        MarginLoop::Closed => {
            let s = open_num.add(&open_den);
            if s.is_zero() {
                return Err(SimulationError::DegenerateLoop);
            }
            (open_num, s)
        }
    };
    let pole_tol = 1e-12 * den.to_f64_vec().iter().map(|c| c.abs()).sum::<f64>();
    let response = Response {
        num,
        den,
        sample_time,
        pole_tol,
    };
    margins_on_grid(&response, 1.0).or_else(|_| margins_on_grid(&response, 1.0 + 1e-7))
}

fn margins_on_grid(response: &Response, stretch: f64) -> Result<Margins, SimulationError> {
    let nyquist = std::f64::consts::PI / response.sample_time;
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| {
            let frac = i as f64 / (GRID_POINTS - 1) as f64;
            let w = nyquist * 10f64.powf(-GRID_DECADES * (1.0 - frac));
            if i + 1 == GRID_POINTS {
                nyquist
            } else {
                w * stretch
            }
        })
        .collect();
    let values = grid
        .iter()
        .map(|w| response.at(*w))
        .collect::<Option<Vec<_>>>()
        .ok_or(SimulationError::EvaluationSingularity)?;

    let mut phase_crossings = Vec::new();
    let mut gain_crossings = Vec::new();
    for i in 0..grid.len() - 1 {
        let (a, b) = (values[i], values[i + 1]);
        if a.im == 0.0 && a.re < 0.0 {
            phase_crossings.push(grid[i]);
        } else if a.im * b.im < 0.0 {
            let w = bisect(grid[i], grid[i + 1], |w| response.at(w).map_or(0.0, |v| v.im));
            if response.at(w).is_some_and(|v| v.re < 0.0) {
                phase_crossings.push(w);
            }
        }
        if (a.norm() - 1.0) * (b.norm() - 1.0) < 0.0 {
            gain_crossings.push(bisect(grid[i], grid[i + 1], |w| {
                response.at(w).map_or(0.0, |v| v.norm() - 1.0)
            }));
        }
    }
    let last = values[values.len() - 1];
    if last.im.abs() <= 1e-12 * last.norm().max(1.0) && last.re < 0.0 {
        phase_crossings.push(nyquist);
    }

    let mut gain_margin_db = f64::INFINITY;
    let mut phase_crossover = None;
    for w in phase_crossings {
        let Some(v) = response.at(w) else { continue };
        let gm = -20.0 * v.norm().log10();
        if gm.abs() < gain_margin_db.abs() {
            gain_margin_db = gm;
            phase_crossover = Some(w);
        }
    }
    let mut phase_margin_deg = f64::INFINITY;
    let mut gain_crossover = None;
    for w in gain_crossings {
        let Some(v) = response.at(w) else { continue };
        // distance of the phase from -180 degrees, in (-180, 180]
        let mut pm = 180.0 + v.arg().to_degrees();
        if pm > 180.0 {
            pm -= 360.0;
        }
        if pm.abs() < phase_margin_deg.abs() {
            phase_margin_deg = pm;
            gain_crossover = Some(w);
        }
    }
    Ok(Margins {
        gain_margin_db,
        phase_margin_deg,
        phase_crossover,
        gain_crossover,
    })
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if (v < 0.0) == (f_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Maps from `v1`, `v2` and `R` to the plant output; all share the
/// denominator `S = Cn Gn + Cd Gd`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensitivityFunctions {
    /// `1 / (1 + G C)`
    pub h1: TransferFunction,
    /// `G / (1 + G C)`
    pub h2: TransferFunction,
    /// `G C / (1 + G C)`
    pub h3: TransferFunction,
}

pub fn sensitivity_functions(
    controller: &Controller,
    plant: &TransferFunction,
) -> Result<SensitivityFunctions, SimulationError> {
    let cn = controller.num_poly();
    let cd = controller.den_poly();
    let open_num = cn.mul(plant.num());
    let open_den = cd.mul(plant.den());
    let s = open_num.add(&open_den);
    if s.is_zero() {
        return Err(SimulationError::DegenerateLoop);
    }
    let tf = |n: Poly| TransferFunction::new(n, s.clone()).map_err(|_| SimulationError::DegenerateLoop);
    Ok(SensitivityFunctions {
        h1: tf(open_den)?,
        h2: tf(plant.num().mul(&cd))?,
        h3: tf(open_num)?,
    })
}
