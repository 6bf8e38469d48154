//! Counterexample-guided synthesis of a stabilizing controller.
//!
//! The two-stage engine alternates a cheap search against a finite set of
//! concrete plants with verification over the whole family, first on the
//! plant grid and then with rounding error included. The one-stage engine
//! searches directly against the interval test.

pub mod search;
pub mod verify;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixedpoint::FixedPointFormat;
use crate::interval::{interval_char_poly, split_packed};
use crate::stability::{jury_interval_cost, JuryStatus};
use crate::transfer::{Controller, PlantFamily, TransferFunction};

pub use search::{fixed_point_score, FixedPlant, Score, SearchSpace, EXHAUSTIVE_LIMIT};
pub use verify::{
    certify, precision_box, sample_family, spot_check, verify_precision, verify_uncertainty, Certificate,
    ExtractionFailed, SpotCheck, Verification,
};

/// Plant precision the loop starts from.
pub const DEFAULT_PLANT_FORMAT: (u32, u32) = (16, 24);
/// Integer and fraction bits added on each precision increase.
pub const PRECISION_STEP: (u32, u32) = (4, 4);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_iterations: usize,
    /// Highest plant precision before giving up.
    pub max_precision: FixedPointFormat,
    /// Wall-clock budget; checked between phases.
    pub timeout: Option<Duration>,
    /// Cost evaluations per synthesize step.
    pub search_budget: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            max_precision: FixedPointFormat::new(32, 32).expect("valid format"),
            timeout: None,
            search_budget: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Error)]
pub enum Failure {
    #[error("iteration limit reached")]
    IterationLimit,
    #[error("precision limit reached")]
    PrecisionLimit,
    #[error("time budget exhausted")]
    Timeout,
    #[error("no candidate found within the search budget")]
    NoCandidate,
    #[error("no concrete counterexample could be extracted")]
    CounterexampleExtractionFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Synthesize,
    VerifyUncertainty,
    VerifyPrecision,
    IncreasePrecision,
    Done,
}

/// One phase transition of the loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub iteration: usize,
    pub phase: Phase,
    pub precision: String,
    pub candidate: Option<String>,
    pub counterexample: Option<String>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SynthesisOutcome {
    Success {
        controller: Controller,
        plant_format: FixedPointFormat,
        iterations: usize,
    },
    Failure(Failure),
}

impl SynthesisOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Self::Success { .. })
    }

    pub fn controller(&self) -> Option<&Controller> {
        match self {
            Self::Success { controller, .. } => Some(controller),
            Self::Failure(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub outcome: SynthesisOutcome,
    /// Interval verdict for the returned controller, or for the last
    /// candidate that reached the precision stage.
    pub certificate: Option<Certificate>,
    pub transcript: Vec<TranscriptRecord>,
    pub elapsed: Duration,
}

/// Loop state carried between iterations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CegisState {
    /// Concrete counterexample plants on the current plant grid.
    pub inputs: Vec<TransferFunction>,
    pub candidate: Controller,
    pub plant_format: FixedPointFormat,
    pub iteration: usize,
    pub seed: u64,
}

impl CegisState {
    pub fn new(controller_format: FixedPointFormat, orders: (usize, usize), plant_format: FixedPointFormat, seed: u64) -> Self {
        Self {
            inputs: Vec::new(),
            candidate: Controller::zero(controller_format, orders.0, orders.1),
            plant_format,
            iteration: 0,
            seed,
        }
    }

    /// Move to a finer plant grid. Old counterexamples are dropped.
    fn increase_precision(&mut self, cap: FixedPointFormat) -> Result<(), Failure> {
        let next = self
            .plant_format
            .widened(PRECISION_STEP.0, PRECISION_STEP.1)
            .map_err(|_| Failure::PrecisionLimit)?;
        if next.integer_bits() > cap.integer_bits() || next.fraction_bits() > cap.fraction_bits() {
            return Err(Failure::PrecisionLimit);
        }
        self.plant_format = next;
        self.inputs.clear();
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn iteration_seed(seed: u64, iteration: usize) -> u64 {
    splitmix64(seed ^ splitmix64(iteration as u64))
}

fn space_for(format: FixedPointFormat, orders: (usize, usize)) -> SearchSpace {
    SearchSpace {
        format,
        num_len: orders.0 + 1,
        den_len: orders.1 + 1,
    }
}

/// Search for a controller stabilizing every plant in `inputs`, using the
/// fixed-point Jury test at `plant_format`. `previous` is probed first.
pub fn synthesize_candidate(
    inputs: &[TransferFunction],
    controller_format: FixedPointFormat,
    orders: (usize, usize),
    seed: u64,
    budget: usize,
    previous: Option<&Controller>,
    plant_format: FixedPointFormat,
) -> Result<Controller, Failure> {
    let space = space_for(controller_format, orders);
    let work_format = plant_format.widest(controller_format);
    let plants: Vec<FixedPlant> = inputs.iter().filter_map(|p| FixedPlant::new(p, work_format)).collect();
    if plants.len() != inputs.len() {
        return Err(Failure::NoCandidate);
    }
    let zero = vec![0; space.dims()];
    let mut starts = vec![zero];
    if let Some(p) = previous.filter(|p| p.format() == controller_format && p.orders() == orders) {
        starts.push(p.raws());
    }
    starts.dedup();
    let result = search::search(space, &starts, seed, budget, |raws| {
        fixed_point_score(&space, raws, &plants, work_format)
    });
    result.raws.map(|r| space.controller(&r)).ok_or(Failure::NoCandidate)
}

struct Run {
    started: Instant,
    limits: Limits,
    transcript: Vec<TranscriptRecord>,
}

impl Run {
    fn new(limits: Limits) -> Self {
        Self {
            started: Instant::now(),
            limits,
            transcript: Vec::new(),
        }
    }

    fn timed_out(&self) -> bool {
        self.limits.timeout.is_some_and(|t| self.started.elapsed() >= t)
    }

    fn record(
        &mut self,
        state: &CegisState,
        phase: Phase,
        candidate: bool,
        counterexample: Option<&TransferFunction>,
        note: impl Into<String>,
    ) {
        let note = note.into();
        log::debug!("iteration {} {:?} at {}: {}", state.iteration, phase, state.plant_format, note);
        self.transcript.push(TranscriptRecord {
            iteration: state.iteration,
            phase,
            precision: state.plant_format.to_string(),
            candidate: candidate.then(|| state.candidate.to_string()),
            counterexample: counterexample.map(ToString::to_string),
            note,
        });
    }

    fn finish(mut self, state: &CegisState, outcome: SynthesisOutcome, certificate: Option<Certificate>) -> SynthesisResult {
        let note = match &outcome {
            SynthesisOutcome::Success { .. } => "success".to_string(),
            SynthesisOutcome::Failure(f) => f.to_string(),
        };
        self.record(state, Phase::Done, outcome.is_success(), None, note);
        SynthesisResult {
            outcome,
            certificate,
            transcript: self.transcript,
            elapsed: self.started.elapsed(),
        }
    }
}

fn start_format(family: &PlantFamily) -> FixedPointFormat {
    family.plant_format()
}

/// The two-stage loop: synthesize, verify on the plant grid, then verify
/// with rounding error; a precision failure moves to a finer plant grid.
pub fn cegis_two_stage(
    family: &PlantFamily,
    controller_format: FixedPointFormat,
    orders: (usize, usize),
    seed: u64,
    limits: Limits,
) -> SynthesisResult {
    let mut run = Run::new(limits);
    let mut state = CegisState::new(controller_format, orders, start_format(family), seed);
    let mut certificate = None;
    loop {
        if state.iteration >= limits.max_iterations {
            return run.finish(&state, SynthesisOutcome::Failure(Failure::IterationLimit), certificate);
        }
        if run.timed_out() {
            return run.finish(&state, SynthesisOutcome::Failure(Failure::Timeout), certificate);
        }
        state.iteration += 1;
        let current = family.with_plant_format(state.plant_format);

        let candidate = synthesize_candidate(
            &state.inputs,
            controller_format,
            orders,
            iteration_seed(seed, state.iteration),
            limits.search_budget,
            Some(&state.candidate),
            state.plant_format,
        );
        match candidate {
            Ok(c) => state.candidate = c,
            Err(f) => {
                run.record(&state, Phase::Synthesize, false, None, f.to_string());
                return run.finish(&state, SynthesisOutcome::Failure(f), certificate);
            }
        }
        run.record(&state, Phase::Synthesize, true, None, format!("{} inputs", state.inputs.len()));

        if run.timed_out() {
            return run.finish(&state, SynthesisOutcome::Failure(Failure::Timeout), certificate);
        }
        match verify_uncertainty(&state.candidate, &current) {
            Err(ExtractionFailed) => {
                run.record(&state, Phase::VerifyUncertainty, true, None, "no concrete counterexample");
                let f = Failure::CounterexampleExtractionFailed;
                return run.finish(&state, SynthesisOutcome::Failure(f), certificate);
            }
            Ok(Verification::Counterexample(plant)) => {
                let repeated = state.inputs.contains(&plant);
                run.record(&state, Phase::VerifyUncertainty, true, Some(&plant), "counterexample");
                if repeated {
                    // the fixed-point test accepted a loop that is unstable in
                    // exact arithmetic: the plant grid is too coarse
                    if let Err(f) = escalate(&mut run, &mut state, limits) {
                        return run.finish(&state, SynthesisOutcome::Failure(f), certificate);
                    }
                } else {
                    state.inputs.push(plant);
                }
                continue;
            }
            Ok(Verification::Ok) => {
                run.record(&state, Phase::VerifyUncertainty, true, None, "no counterexample");
            }
        }

        if run.timed_out() {
            return run.finish(&state, SynthesisOutcome::Failure(Failure::Timeout), certificate);
        }
        let cert = certify(&state.candidate, &current);
        let stable = cert.is_stable();
        run.record(
            &state,
            Phase::VerifyPrecision,
            true,
            None,
            format!("{} over {} box(es)", cert.verdict.status, cert.boxes),
        );
        certificate = Some(cert);
        if stable {
            let outcome = SynthesisOutcome::Success {
                controller: state.candidate.clone(),
                plant_format: state.plant_format,
                iterations: state.iteration,
            };
            return run.finish(&state, outcome, certificate);
        }
        if let Err(f) = escalate(&mut run, &mut state, limits) {
            return run.finish(&state, SynthesisOutcome::Failure(f), certificate);
        }
    }
}

fn escalate(run: &mut Run, state: &mut CegisState, limits: Limits) -> Result<(), Failure> {
    let from = state.plant_format;
    state.increase_precision(limits.max_precision)?;
    run.record(state, Phase::IncreasePrecision, false, None, format!("from {from}"));
    Ok(())
}

/// Interval search cost of a candidate over the rounding-inflated family.
fn interval_score(space: &SearchSpace, raws: &[i128], family: &PlantFamily) -> Score {
    if raws[space.num_len] == 0 {
        return Score::rejected();
    }
    let candidate = space.controller(raws);
    let (num, den) = split_packed(&precision_box(family), family.num_len());
    let j = jury_interval_cost(&interval_char_poly(&candidate, &num, &den));
    Score {
        cost: j.cost,
        accepted: j.status == JuryStatus::Stable,
    }
}

/// The one-stage engine: every candidate is scored by the interval test on
/// the rounding-inflated family, so an accepted candidate is already sound
/// and the plant grid never changes.
pub fn cegis_one_stage(
    family: &PlantFamily,
    controller_format: FixedPointFormat,
    orders: (usize, usize),
    seed: u64,
    limits: Limits,
) -> SynthesisResult {
    let mut run = Run::new(limits);
    let mut state = CegisState::new(controller_format, orders, start_format(family), seed);
    if limits.max_iterations == 0 {
        return run.finish(&state, SynthesisOutcome::Failure(Failure::IterationLimit), None);
    }
    if run.timed_out() {
        return run.finish(&state, SynthesisOutcome::Failure(Failure::Timeout), None);
    }
    state.iteration = 1;
    let space = space_for(controller_format, orders);
    let starts = vec![vec![0; space.dims()]];
    let found = search::search(space, &starts, iteration_seed(seed, 1), limits.search_budget, |raws| {
        interval_score(&space, raws, family)
    });
    let Some(raws) = found.raws else {
        let note = format!("no candidate after {} evaluations", found.evaluations);
        run.record(&state, Phase::Synthesize, false, None, note);
        return run.finish(&state, SynthesisOutcome::Failure(Failure::NoCandidate), None);
    };
    state.candidate = space.controller(&raws);
    run.record(&state, Phase::Synthesize, true, None, format!("{} evaluations", found.evaluations));
    let cert = certify(&state.candidate, family);
    run.record(
        &state,
        Phase::VerifyPrecision,
        true,
        None,
        format!("{} over {} box(es)", cert.verdict.status, cert.boxes),
    );
    let outcome = SynthesisOutcome::Success {
        controller: state.candidate.clone(),
        plant_format: state.plant_format,
        iterations: state.iteration,
    };
    run.finish(&state, outcome, Some(cert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_decimal;
    use crate::stability::jury_stable;
    use crate::transfer::{char_poly, Poly};

    fn poly(c: &[&str]) -> Poly {
        Poly::new(c.iter().map(|s| parse_decimal(s).unwrap()).collect())
    }

    fn fmt(i: u32, f: u32) -> FixedPointFormat {
        FixedPointFormat::new(i, f).unwrap()
    }

    fn cruise(delta: &str) -> PlantFamily {
        let g = TransferFunction::new(poly(&["0.0264"]), poly(&["1", "-0.9998"])).unwrap();
        PlantFamily::uniform(g, parse_decimal(delta).unwrap(), fmt(16, 24)).unwrap()
    }

    #[test]
    fn empty_inputs_accept_the_zero_controller() {
        let c = synthesize_candidate(&[], fmt(4, 16), (2, 2), 1, 10, None, fmt(16, 24)).unwrap();
        assert!(c.is_zero());
    }

    #[test]
    fn first_counterexample_admits_a_stabilizing_controller() {
        let g = TransferFunction::new(poly(&["0.026506"]), poly(&["1.000610", "1.002838"])).unwrap();
        let c = synthesize_candidate(std::slice::from_ref(&g), fmt(4, 16), (2, 2), 5, 200_000, None, fmt(16, 24)).unwrap();
        assert!(jury_stable(&char_poly(&c, &g).unwrap()).is_stable());
    }

    #[test]
    fn contradictory_plants_have_no_candidate() {
        // k + (z - 1.5) and -k + (z - 1.5) cannot both have |root| < 1
        // when |k| <= 1 and the denominator is a constant in {-1, 0, 1}
        let g1 = TransferFunction::new(poly(&["1"]), poly(&["1", "-1.5"])).unwrap();
        let g2 = TransferFunction::new(poly(&["-1"]), poly(&["1", "-1.5"])).unwrap();
        let r = synthesize_candidate(&[g1, g2], fmt(1, 0), (0, 0), 0, 1000, None, fmt(16, 24));
        assert_eq!(r, Err(Failure::NoCandidate));
    }

    #[test]
    fn zero_limits_fail_immediately() {
        let family = cruise("0");
        let limits = Limits {
            max_iterations: 0,
            ..Limits::default()
        };
        let r = cegis_two_stage(&family, fmt(4, 16), (2, 2), 0, limits);
        assert_eq!(r.outcome, SynthesisOutcome::Failure(Failure::IterationLimit));
        let limits = Limits {
            timeout: Some(Duration::ZERO),
            ..Limits::default()
        };
        let r = cegis_one_stage(&family, fmt(4, 16), (2, 2), 0, limits);
        assert_eq!(r.outcome, SynthesisOutcome::Failure(Failure::Timeout));
    }

    #[test]
    fn precision_cap_is_enforced() {
        let mut state = CegisState::new(fmt(4, 16), (1, 1), fmt(28, 28), 0);
        assert!(state.increase_precision(fmt(32, 32)).is_ok());
        assert_eq!(state.plant_format, fmt(32, 32));
        assert_eq!(state.increase_precision(fmt(32, 32)), Err(Failure::PrecisionLimit));
    }

    #[test]
    fn two_stage_cruise_point_family() {
        let family = cruise("0");
        let r = cegis_two_stage(&family, fmt(4, 16), (1, 1), 7, Limits::default());
        assert!(r.outcome.is_success(), "{:?}", r.outcome);
        assert!(r.certificate.unwrap().is_stable());
        // first candidate is the zero controller
        assert_eq!(r.transcript[0].phase, Phase::Synthesize);
        assert!(r.transcript[1].counterexample.is_some());
    }

    #[test]
    fn seeds_differ_per_iteration() {
        assert_ne!(iteration_seed(1, 1), iteration_seed(1, 2));
        assert_eq!(iteration_seed(9, 3), iteration_seed(9, 3));
    }
}
