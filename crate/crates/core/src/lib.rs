//! Synthesis of fixed-point digital controllers that stabilize every member
//! of an uncertain plant family in closed loop.
//!
//! The crate is organized bottom-up:
//!
//! * [`fixedpoint`]: exact `<I,F>` scaled-integer arithmetic.
//! * [`interval`]: exact-rational interval arithmetic.
//! * [`transfer`]: polynomials, transfer functions, plant families and the
//!   closed-loop characteristic polynomial.
//! * [`discretize`]: zero-order-hold discretization of continuous plants.
//! * [`stability`]: Jury's criterion over exact, fixed-point and interval
//!   coefficients, plus a floating-point root oracle.
//! * [`cegis`]: the counterexample-guided synthesis loop.
//! * [`simulate`]: quantized closed-loop simulation and frequency margins.

pub mod cegis;
pub mod discretize;
pub mod fixedpoint;
pub mod interval;
pub mod rational;
pub mod roots;
pub mod simulate;
pub mod stability;
pub mod transfer;

pub use cegis::{
    cegis_one_stage, cegis_two_stage, synthesize_candidate, verify_precision, verify_uncertainty, CegisState,
    Failure, Limits, Phase, SynthesisOutcome, SynthesisResult, TranscriptRecord, Verification,
};
pub use discretize::{zoh_discretize, ContinuousTF, DiscretizeError};
pub use fixedpoint::{
    fp_add, fp_div, fp_mul, fp_sub, quantize_nearest, quantize_poly, quantize_truncate, FixedPointError,
    FixedPointFormat, FixedPointValue, Rounding,
};
pub use interval::{family_to_interval_poly, IntervalError, IntervalPoly, RationalInterval};
pub use rational::{parse_decimal, Rational};
pub use simulate::{
    frequency_margins, sensitivity_functions, step_response, Margins, MarginLoop, NoiseMode, NoiseModel,
    SimulationTrace,
};
pub use stability::{jury_stable, jury_stable_interval, root_oracle, JuryCondition, JuryStatus, JuryVerdict};
pub use transfer::{char_poly, Controller, PlantFamily, Poly, TransferError, TransferFunction};
