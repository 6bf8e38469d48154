//! Quantized closed-loop simulation and frequency-domain margins.
//!
//! The loop is unity negative feedback: `e = r - (y + v1)`, `u = C e`,
//! and the plant is driven by `u + v2`. The controller runs in truncating
//! fixed point; the plant runs in double-double arithmetic.

mod frequency;

pub use frequency::{frequency_margins, sensitivity_functions, Margins, MarginLoop, SensitivityFunctions};

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use twofloat::TwoFloat;

use crate::fixedpoint::{FixedPointError, FixedPointFormat, FixedPointValue};
use crate::rational::to_twofloat;
use crate::transfer::{Controller, Poly, TransferFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("controller arithmetic overflowed at step {step}")]
    ArithmeticOverflow { step: usize },
    #[error("both controller and plant have direct feedthrough (algebraic loop)")]
    AlgebraicLoop,
    #[error("{0} is not causal (numerator degree exceeds denominator degree)")]
    NonCausal(&'static str),
    #[error("loop transfer function has a pole on the evaluation grid")]
    EvaluationSingularity,
    #[error("1 + C*G is identically zero")]
    DegenerateLoop,
    #[error("at least one simulation step is required")]
    NoSteps,
    #[error(transparent)]
    FixedPoint(#[from] FixedPointError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseMode {
    Zero,
    /// `sign(e_{k-1}) q / 2` on both channels.
    WorstCase,
    /// Independent uniform draws in `[-q/2, q/2]`.
    SeededUniform,
}

/// ADC (`q1`, plant output) and DAC (`q2`, controller output) quantization noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub q1: f64,
    pub q2: f64,
    pub mode: NoiseMode,
}

impl NoiseModel {
    pub fn zero() -> Self {
        Self {
            q1: 0.0,
            q2: 0.0,
            mode: NoiseMode::Zero,
        }
    }

    pub fn worst_case(q1: f64, q2: f64) -> Self {
        Self {
            q1,
            q2,
            mode: NoiseMode::WorstCase,
        }
    }

    pub fn uniform(q1: f64, q2: f64) -> Self {
        Self {
            q1,
            q2,
            mode: NoiseMode::SeededUniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub k: usize,
    pub t: f64,
    pub r: f64,
    pub e: FixedPointValue,
    pub u: FixedPointValue,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub samples: Vec<TraceSample>,
    /// First step where `|y|` crossed the divergence threshold; the run
    /// stops there.
    pub diverged_at: Option<usize>,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn max_abs_output(&self) -> f64 {
        self.samples.iter().map(|s| s.y.abs()).fold(0.0, f64::max)
    }

    pub fn is_bounded(&self) -> bool {
        self.diverged_at.is_none() && self.samples.iter().all(|s| s.y.is_finite())
    }

    /// `k,t,r,e,u,y` records with a header; `e` and `u` are exact decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,t,r,e,u,y\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{},{},{},{}", s.k, s.t, s.r, s.e, s.u, s.y);
        }
        out
    }
}

/// `|y| > DIVERGENCE_FACTOR * |r|` marks a diverging trace.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub reference: f64,
    /// Fixed-point format of controller signals; defaults to `<32,F>` with
    /// the controller's `F`, narrowed to fit 64 bits.
    pub signal_format: Option<FixedPointFormat>,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            reference: 1.0,
            signal_format: None,
        }
    }
}

/// Delay between input and output of `num / den` (its relative degree).
fn relative_degree(num: &Poly, den: &Poly, what: &'static str) -> Result<usize, SimulationError> {
    let (num, den) = (num.normalized(), den.normalized());
    if num.is_zero() {
        return Ok(den.degree() + 1);
    }
    if num.degree() > den.degree() {
        return Err(SimulationError::NonCausal(what));
    }
    Ok(den.degree() - num.degree())
}

fn pad_front<T: Clone>(v: &[T], len: usize, zero: T) -> Vec<T> {
    let mut out = vec![zero; len.saturating_sub(v.len())];
    out.extend_from_slice(v);
    out
}

fn default_signal_format(coeff: FixedPointFormat) -> Result<FixedPointFormat, FixedPointError> {
    let f = coeff.fraction_bits();
    let i = 32.min(FixedPointFormat::MAX_TOTAL_BITS - f).max(coeff.integer_bits());
    FixedPointFormat::new(i, f)
}

/// Step response of the quantized closed loop.
pub fn step_response(
    controller: &Controller,
    plant: &TransferFunction,
    sample_time: f64,
    steps: usize,
    noise: NoiseModel,
    seed: u64,
) -> Result<SimulationTrace, SimulationError> {
    step_response_with(controller, plant, sample_time, steps, noise, seed, StepOptions::default())
}

pub fn step_response_with(
    controller: &Controller,
    plant: &TransferFunction,
    sample_time: f64,
    steps: usize,
    noise: NoiseModel,
    seed: u64,
    options: StepOptions,
) -> Result<SimulationTrace, SimulationError> {
    if steps == 0 {
        return Err(SimulationError::NoSteps);
    }
    let signal = match options.signal_format {
        Some(f) => f,
        None => default_signal_format(controller.format())?,
    };
    let zero = FixedPointValue::zero(signal);

    // controller: a_0 u_k = sum b_i e_{k-i} - sum_{i>=1} a_i u_{k-i}
    let c_den = controller.den_poly().normalized();
    let c_num = controller.num_poly().normalized();
    let c_delay = relative_degree(&c_num, &c_den, "controller")?;
    let lc = c_den.len();
    let widen = |p: &Poly| -> Result<Vec<FixedPointValue>, FixedPointError> {
        p.coeffs()
            .iter()
            .map(|c| FixedPointValue::quantize(c, signal, crate::fixedpoint::Rounding::Truncate))
            .collect()
    };
    let ca = widen(&c_den)?;
    let cb = pad_front(&widen(&c_num)?, lc, zero);
    let controller_feedthrough = c_delay == 0;

    // plant: a_0 y_k = sum b_i w_{k-i} - sum_{i>=1} a_i y_{k-i}
    let p_delay = relative_degree(plant.num(), plant.den(), "plant")?;
    let lp = plant.den().len();
    let pa: Vec<TwoFloat> = plant.den().coeffs().iter().map(to_twofloat).collect();
    let pb = pad_front(
        &plant.num().coeffs().iter().map(to_twofloat).collect::<Vec<_>>(),
        lp,
        TwoFloat::from(0.0),
    );
    let plant_feedthrough = p_delay == 0;
    if controller_feedthrough && plant_feedthrough {
        return Err(SimulationError::AlgebraicLoop);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = options.reference;
    let threshold = DIVERGENCE_FACTOR * r.abs().max(f64::MIN_POSITIVE);
    // histories, most recent first
    let mut e_hist = vec![zero; lc];
    let mut u_hist = vec![zero; lc];
    let mut w_hist = vec![TwoFloat::from(0.0); lp];
    let mut y_hist = vec![TwoFloat::from(0.0); lp];
    let mut samples = Vec::with_capacity(steps);
    let mut diverged_at = None;
    let mut last_e_sign = 0.0;

    for k in 0..steps {
        let overflow = |_| SimulationError::ArithmeticOverflow { step: k };
        let (nu1, nu2) = match noise.mode {
            NoiseMode::Zero => (0.0, 0.0),
            NoiseMode::WorstCase => (last_e_sign * noise.q1 / 2.0, last_e_sign * noise.q2 / 2.0),
            NoiseMode::SeededUniform => (
                noise.q1 * (rng.gen::<f64>() - 0.5),
                noise.q2 * (rng.gen::<f64>() - 0.5),
            ),
        };
        let controller_step = |e_hist: &mut Vec<FixedPointValue>,
                               u_hist: &mut Vec<FixedPointValue>,
                               e_k: FixedPointValue|
         -> Result<FixedPointValue, FixedPointError> {
            e_hist.rotate_right(1);
            e_hist[0] = e_k;
            let mut acc = zero;
            for i in 0..lc {
                acc = acc.checked_add(&cb[i].checked_mul(&e_hist[i])?)?;
                if i > 0 {
                    acc = acc.checked_sub(&ca[i].checked_mul(&u_hist[i - 1])?)?;
                }
            }
            let u = acc.checked_div(&ca[0])?;
            u_hist.rotate_right(1);
            u_hist[0] = u;
            Ok(u)
        };
        let plant_output = |w_hist: &[TwoFloat], y_hist: &[TwoFloat]| -> TwoFloat {
            // w_hist[0] is w_k, y_hist[0] is y_{k-1}
            let mut acc = TwoFloat::from(0.0);
            for i in 0..lp {
                acc += pb[i] * w_hist[i];
                if i > 0 {
                    acc -= pa[i] * y_hist[i - 1];
                }
            }
            acc / pa[0]
        };
        let quantize_error = |y: f64| {
            let err = r - (y + nu1);
            FixedPointValue::quantize_f64(err, signal, crate::fixedpoint::Rounding::Truncate)
        };

        let (e, u, y);
        if !plant_feedthrough {
            // y_k depends on past inputs only
            w_hist.rotate_right(1);
            w_hist[0] = TwoFloat::from(0.0);
            let yk = plant_output(&w_hist, &y_hist);
            let ek = quantize_error(f64::from(yk)).map_err(overflow)?;
            let uk = controller_step(&mut e_hist, &mut u_hist, ek).map_err(overflow)?;
            w_hist[0] = TwoFloat::from(uk.to_f64() + nu2);
            // y_k is unchanged when the plant is strictly proper
            (e, u, y) = (ek, uk, yk);
        } else {
            // the controller is strictly proper: u_k from past errors
            let uk = controller_step(&mut e_hist, &mut u_hist, zero).map_err(overflow)?;
            w_hist.rotate_right(1);
            w_hist[0] = TwoFloat::from(uk.to_f64() + nu2);
            let yk = plant_output(&w_hist, &y_hist);
            let ek = quantize_error(f64::from(yk)).map_err(overflow)?;
            e_hist[0] = ek;
            (e, u, y) = (ek, uk, yk);
        }
        y_hist.rotate_right(1);
        y_hist[0] = y;
        last_e_sign = f64::from(e.signum());
        let y = f64::from(y);
        samples.push(TraceSample {
            k,
            t: k as f64 * sample_time,
            r,
            e,
            u,
            y,
        });
        // NaN counts as divergence
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(y.abs() <= threshold) {
            diverged_at = Some(k);
            break;
        }
    }
    Ok(SimulationTrace { samples, diverged_at })
}
